import init, { activationCurve, describeModel, Trainer } from "./pkg/fkb_wasm_demo.js";

const X_MIN = -3, X_MAX = 3, N = 241;
const $ = (id) => document.getElementById(id);

function plot(canvas, series, { xmin = X_MIN, xmax = X_MAX, log = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const tf = (v) => (log ? Math.log10(Math.max(v, 1e-12)) : v);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.y) if (Number.isFinite(tf(v))) { lo = Math.min(lo, tf(v)); hi = Math.max(hi, tf(v)); }
  if (!Number.isFinite(lo)) return;
  if (hi - lo < 1e-9) { lo -= 1; hi += 1; }
  const pad = (hi - lo) * 0.08;
  lo -= pad; hi += pad;
  const px = (x) => ((x - xmin) / (xmax - xmin)) * w;
  const py = (y) => h - ((tf(y) - lo) / (hi - lo)) * h;

  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  if (!log && lo < 0 && hi > 0) { ctx.moveTo(0, py(0)); ctx.lineTo(w, py(0)); }
  if (xmin < 0 && xmax > 0) { ctx.moveTo(px(0), 0); ctx.lineTo(px(0), h); }
  ctx.stroke();

  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    ctx.setLineDash(s.dash ? [6, 4] : []);
    if (s.points) {
      s.x.forEach((x, i) => { ctx.beginPath(); ctx.arc(px(x), py(s.y[i]), 2.5, 0, 2 * Math.PI); ctx.fill(); });
      continue;
    }
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

const grid = (n, lo = X_MIN, hi = X_MAX) => Array.from({ length: n }, (_, i) => lo + ((hi - lo) * i) / (n - 1));
const xs = grid(N);

function drawActivation() {
  const alpha = Number($("act-alpha").value);
  $("act-alpha-val").textContent = alpha.toFixed(2);
  const out = activationCurve($("act-name").value, alpha, X_MIN, X_MAX, N);
  plot($("act-plot"), [
    { x: xs, y: out.slice(0, N), color: "#1f77b4" },
    { x: xs, y: out.slice(N), color: "#d62728", dash: true },
  ]);
}

let trainer = null;
let running = false;

function resetTrainer() {
  trainer?.free();
  trainer = new Trainer($("fit-target").value, Number($("fit-hidden").value), Number($("fit-width").value), 48, Number($("fit-seed").value));
  trainer.setLearningRate(Number($("fit-lr").value));
  drawFit();
}

function drawFit() {
  const sx = Array.from(trainer.sampleX()), sy = Array.from(trainer.sampleY());
  plot($("fit-plot"), [
    { x: sx, y: sy, color: "#888", points: true },
    { x: xs, y: Array.from(trainer.predict(N)), color: "#1f77b4" },
  ]);
  const hist = Array.from(trainer.history());
  if (hist.length > 1) plot($("loss-plot"), [{ x: hist.map((_, i) => i), y: hist, color: "#2ca02c" }], { xmin: 0, xmax: hist.length - 1, log: true });
  else $("loss-plot").getContext("2d").clearRect(0, 0, 300, 300);
  const last = hist.length ? hist[hist.length - 1].toExponential(3) : "-";
  $("fit-status").textContent = `epoch ${trainer.epochs}  loss ${last}`;
  drawEnsemble();
}

function drawEnsemble() {
  const noise = Number($("ens-noise").value);
  $("ens-noise-val").textContent = noise.toFixed(2);
  const members = Math.max(1, Number($("ens-members").value));
  const y = Array.from(trainer.ensemblePredict(N, members, noise, Number($("ens-seed").value)));
  plot($("ens-plot"), [
    { x: xs, y: Array.from(trainer.predict(N)), color: "#1f77b4", dash: true },
    { x: xs, y, color: "#ff7f0e" },
  ]);
}

function trainLoop() {
  if (!running) return;
  trainer.setLearningRate(Number($("fit-lr").value));
  trainer.train(10);
  drawFit();
  if (trainer.epochs >= 5000) stop();
  else requestAnimationFrame(trainLoop);
}

function stop() {
  running = false;
  $("fit-run").textContent = "train";
}

async function main() {
  await init();
  for (const id of ["act-name", "act-alpha"]) $(id).addEventListener("input", drawActivation);
  for (const id of ["fit-target", "fit-hidden", "fit-width", "fit-seed"]) $(id).addEventListener("change", () => { stop(); resetTrainer(); });
  for (const id of ["ens-members", "ens-noise", "ens-seed"]) $(id).addEventListener("input", drawEnsemble);
  $("fit-reset").addEventListener("click", () => { stop(); resetTrainer(); });
  $("fit-run").addEventListener("click", () => {
    running = !running;
    $("fit-run").textContent = running ? "pause" : "train";
    trainLoop();
  });
  $("model-export").addEventListener("click", () => {
    const text = trainer.modelText();
    $("model-text").textContent = text;
    $("model-status").textContent = describeModel(text);
  });
  drawActivation();
  resetTrainer();
}

main();
