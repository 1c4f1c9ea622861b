import init, { defaultConfig, spectrum, map, classify } from "./pkg/magnon_cmt_web.js";

const $ = (id) => document.getElementById(id);
const DC = [-400, 400];
const DM = [-300, 300];

function loadPreset() {
  $("config").value = defaultConfig($("scenario").value, +$("eta").value, +$("xi").value, false);
}

function drawSpectrum(canvas, data) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const x = (d) => ((d - DC[0]) / (DC[1] - DC[0])) * w;
  const y = (v) => h - Math.min(v, 1.2) / 1.2 * h;
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(0, y(1));
  ctx.lineTo(w, y(1));
  ctx.stroke();
  ctx.strokeStyle = "#1f5fbf";
  ctx.beginPath();
  data.delta_c.forEach((d, i) => (i ? ctx.lineTo(x(d), y(data.abs[i])) : ctx.moveTo(x(d), y(data.abs[i]))));
  ctx.stroke();
  ctx.fillStyle = "#c33";
  for (const dip of data.dips) ctx.fillRect(x(dip.delta_c) - 2, y(dip.min) - 2, 4, 4);
}

function drawMap(canvas, data) {
  const ctx = canvas.getContext("2d");
  const nx = data.delta_c.length;
  const ny = data.delta_m.length;
  const img = ctx.createImageData(nx, ny);
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      const v = Math.min(data.abs[j * nx + i], 1);
      const k = 4 * ((ny - 1 - j) * nx + i);
      img.data[k] = 255 * v;
      img.data[k + 1] = 255 * v * v;
      img.data[k + 2] = 255 * (1 - v);
      img.data[k + 3] = 255;
    }
  }
  const tmp = new OffscreenCanvas(nx, ny);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function update() {
  const cfg = $("config").value;
  const phase = Math.PI * +$("phase").value;
  const critical = $("critical").checked;
  $("phase-val").textContent = (+$("phase").value).toFixed(2);
  try {
    drawSpectrum($("spectrum"), JSON.parse(spectrum(cfg, phase, DC[0], DC[1], 801, critical)));
    if ($("scenario").value.endsWith("coupled")) {
      drawMap($("map"), JSON.parse(map(cfg, phase, DC[0], DC[1], 201, DM[0], DM[1], 121, critical)));
      const c = JSON.parse(classify(cfg, phase, DM[0], DM[1], 241, critical));
      $("status").textContent =
        `${c.short}${c.classification.strong ? " (strong)" : ""}  ` +
        `gap ${c.classification.real_gap.toFixed(2)} MHz, mean linewidth ${c.classification.mean_linewidth.toFixed(2)} MHz, ` +
        `|C| ${c.classification.cooperativity.toFixed(3)}, cavity loading ${c.cavity_loading[0].toFixed(1)} ${c.cavity_loading[1] >= 0 ? "+" : "-"} ${Math.abs(c.cavity_loading[1]).toFixed(1)}j MHz`;
    } else {
      $("map").getContext("2d").clearRect(0, 0, 520, 300);
      $("status").textContent = "cavity only: no map";
    }
  } catch (e) {
    $("status").textContent = `error: ${e}`;
  }
}

await init();
loadPreset();
update();
$("load").onclick = () => { loadPreset(); update(); };
$("run").onclick = update;
$("phase").oninput = update;
$("critical").onchange = update;
