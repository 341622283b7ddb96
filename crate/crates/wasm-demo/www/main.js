// Build with: cargo build --release --target wasm32-unknown-unknown -p gaitkit-demo
// then: wasm-bindgen --target web --out-dir www/pkg target/wasm32-unknown-unknown/release/gaitkit_demo.wasm
import init, { segment_demo, orientation_demo, sprt_demo } from "./pkg/gaitkit_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function setup(canvas) {
  const ratio = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * ratio;
  canvas.height = canvas.clientHeight * ratio;
  const ctx = canvas.getContext("2d");
  ctx.scale(ratio, ratio);
  ctx.clearRect(0, 0, canvas.clientWidth, canvas.clientHeight);
  return ctx;
}

// Draws series [{x, y, color}] on shared axes; marks are vertical lines.
function plot(canvas, series, { marks = [], hlines = [] } = {}) {
  const ctx = setup(canvas);
  const w = canvas.clientWidth, h = canvas.clientHeight, pad = 6;
  const xs = series.flatMap((s) => s.x), ys = series.flatMap((s) => s.y).concat(hlines.map((l) => l.y));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  for (const m of marks) {
    ctx.strokeStyle = m.color;
    ctx.beginPath();
    ctx.moveTo(px(m.x), m.top ? 0 : h / 2);
    ctx.lineTo(px(m.x), m.top ? h / 2 : h);
    ctx.stroke();
  }
  for (const l of hlines) {
    ctx.strokeStyle = l.color;
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(0, py(l.y));
    ctx.lineTo(w, py(l.y));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width || 1;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
  }
}

const index = (n) => Array.from({ length: n }, (_, i) => i);

function runSegment() {
  try {
    const r = JSON.parse(segment_demo(num("seg-subject"), num("seg-duration"), num("seg-noise")));
    $("seg-info").textContent =
      `${r.cycles} cycles kept, ${r.dropped} dropped. Blue ticks: detected heel strikes (top); grey: true ones (bottom).`;
    plot($("seg-plot"), [{ x: r.t, y: r.magnitude, color: "#333" }], {
      marks: [
        ...r.detected.map((x) => ({ x, color: "#1f6fd1", top: true })),
        ...r.truth.map((x) => ({ x, color: "#aaa", top: false })),
      ],
    });
  } catch (e) {
    $("seg-info").textContent = String(e);
  }
}

function runOrientation() {
  try {
    const r = JSON.parse(orientation_demo(7, num("or-yaw"), num("or-pitch"), num("or-roll")));
    const d = r.device;
    plot($("or-device"), [
      { x: index(d.x.length), y: d.x, color: "#d14" },
      { x: index(d.y.length), y: d.y, color: "#1a1" },
      { x: index(d.z.length), y: d.z, color: "#14d" },
    ]);
    const u = r.upright, v = r.rotated;
    plot($("or-frame"), [
      { x: index(u.zeta.length), y: u.zeta, color: "#14d", width: 3 },
      { x: index(v.zeta.length), y: v.zeta, color: "#fff" },
      { x: index(u.xi.length), y: u.xi, color: "#d14", width: 3 },
      { x: index(v.xi.length), y: v.xi, color: "#fff" },
    ]);
    $("or-info").textContent =
      "Top: raw device axes of the rotated phone. Bottom: vertical (blue) and forward (red) rows of three " +
      "normalized cycles, upright in bold with the rotated copy drawn over in white. " +
      (r.same_boundaries ? "Cycle boundaries are identical." : "Cycle boundaries differ.");
  } catch (e) {
    $("or-info").textContent = String(e);
  }
}

let seed = 1;
function runSprt() {
  try {
    const r = JSON.parse(sprt_demo(num("sp-sep"), num("sp-alpha"), num("sp-beta"), 10, seed++));
    const series = r.paths.map((p) => ({
      x: index(p.trace.length + 1),
      y: [0, ...p.trace],
      color: p.genuine ? "#1a1" : "#d14",
    }));
    const wrong = r.paths.filter((p) => (p.genuine ? p.decision !== "accept_H1" : p.decision !== "accept_H0")).length;
    const n = r.paths.map((p) => p.trace.length).sort((a, b) => a - b);
    $("sp-info").textContent =
      `A = ${r.a.toFixed(3)}, B = ${r.b.toFixed(3)}. ${wrong} of ${r.paths.length} streams decided wrongly; ` +
      `median ${n[n.length >> 1]} cycles. Green: genuine user, red: impostor.`;
    plot($("sp-plot"), series, { hlines: [{ y: r.a, color: "#d14" }, { y: r.b, color: "#1a1" }] });
  } catch (e) {
    $("sp-info").textContent = String(e);
  }
}

await init();
$("seg-run").addEventListener("click", runSegment);
$("sp-run").addEventListener("click", runSprt);
for (const id of ["or-yaw", "or-pitch", "or-roll"]) $(id).addEventListener("input", runOrientation);
runSegment();
runOrientation();
runSprt();
