// Built with: wasm-pack build crates/demo-wasm --target web --out-dir www/pkg
import init, { spectrum, selection, frontier } from "./pkg/market_geometry_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, text, isError) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function frame(canvas, xs, ys, pad = 30) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const lo = (v) => Math.min(...v), hi = (v) => Math.max(...v);
  let [x0, x1, y0, y1] = [lo(xs), hi(xs), lo(ys), hi(ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  return { ctx, sx, sy };
}

function dot(ctx, x, y, r, color) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function runSpectrum() {
  try {
    const v = JSON.parse(spectrum(num("s-assets"), num("s-obs"), num("s-factors"), num("s-replicas"), num("s-seed")));
    report("s-out", `effective dimension d = ${v.dimension} (ranks above the 95% time-permutation envelope)`);
    const k = Math.min(15, v.eigenvalues.length);
    const ranks = [...Array(k).keys()];
    const top = v.eigenvalues.slice(0, k), env = v.envelope.slice(0, k);
    const bars = frame($("s-bars"), [-0.5, k - 0.5], [0, ...top, ...env]);
    const w = (bars.sx(1) - bars.sx(0)) * 0.7;
    ranks.forEach((i) => {
      bars.ctx.fillStyle = i < v.dimension ? "#2a6fdb" : "#9bb7e0";
      bars.ctx.fillRect(bars.sx(i) - w / 2, bars.sy(top[i]), w, bars.sy(0) - bars.sy(top[i]));
    });
    bars.ctx.strokeStyle = "#d33";
    bars.ctx.beginPath();
    ranks.forEach((i) => (i ? bars.ctx.lineTo : bars.ctx.moveTo).call(bars.ctx, bars.sx(i), bars.sy(env[i])));
    bars.ctx.stroke();

    const xs = v.coords.map((c) => c[0]), ys = v.coords.map((c) => c[1]);
    const cloud = frame($("s-cloud"), xs, ys);
    const cmax = Math.max(...v.caps);
    v.coords.forEach((c, i) => dot(cloud.ctx, cloud.sx(c[0]), cloud.sy(c[1]), 2 + 5 * Math.sqrt(v.caps[i] / cmax), "#2a6fdb88"));
    runSelection();
  } catch (e) {
    report("s-out", String(e), true);
  }
}

function runSelection() {
  const theta = Number($("p-theta").value);
  $("p-theta-val").textContent = theta.toFixed(2);
  try {
    const v = JSON.parse(selection(num("s-assets"), num("s-obs"), num("s-factors"), num("s-seed"), $("p-dirs").value, theta));
    report("p-out", `${v.selected} of ${v.assets.length} assets have f > ${theta.toFixed(2)} in directions ${v.directions.join("-")}`);
    const plot = frame($("p-cloud"), v.assets.map((a) => a.x), v.assets.map((a) => a.y));
    v.assets.forEach((a) => {
      const r = a.selected ? 3 + 40 * a.weight : 2.5;
      dot(plot.ctx, plot.sx(a.x), plot.sy(a.y), r, a.selected ? "#e07b00cc" : "#bbbbbb");
    });
  } catch (e) {
    report("p-out", String(e), true);
  }
}

function runFrontier() {
  try {
    const v = JSON.parse(frontier(num("f-assets"), 500, num("f-points"), num("f-samples"), num("f-seed")));
    const all = [...v.frontier, ...v.assets, ...v.samples];
    const plane = frame($("f-plane"), [0, ...all.map((p) => p[0])], all.map((p) => p[1]));
    v.samples.forEach((p) => dot(plane.ctx, plane.sx(p[0]), plane.sy(p[1]), 1, "#99999966"));
    plane.ctx.strokeStyle = "#2a6fdb";
    plane.ctx.lineWidth = 2;
    plane.ctx.beginPath();
    v.frontier.forEach((p, i) => (i ? plane.ctx.lineTo : plane.ctx.moveTo).call(plane.ctx, plane.sx(p[0]), plane.sy(p[1])));
    plane.ctx.stroke();
    plane.ctx.lineWidth = 1;
    v.assets.forEach((p) => dot(plane.ctx, plane.sx(p[0]), plane.sy(p[1]), 4, "#d33"));
    report("f-out", `${v.frontier.length} frontier points (daily sigma, mu); red dots are single assets`);
  } catch (e) {
    report("f-out", String(e), true);
  }
}

await init();
$("s-run").addEventListener("click", runSpectrum);
$("p-dirs").addEventListener("change", runSelection);
$("p-theta").addEventListener("input", runSelection);
$("f-run").addEventListener("click", runFrontier);
runSpectrum();
runFrontier();
