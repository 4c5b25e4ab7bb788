import init, { adaptation_demo, policy_sweep, lr_schedule } from "./pkg/driftcal_web.js";

const PAD = 40;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xmax, ymin, ymax) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(PAD, PAD / 2);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - PAD / 2, h - PAD);
  ctx.stroke();
  const span = ymax - ymin || 1;
  const x = (v) => PAD + (v / (xmax || 1)) * (w - 1.5 * PAD);
  const y = (v) => h - PAD - ((v - ymin) / span) * (h - 1.5 * PAD);
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  ctx.fillText(String(+ymax.toPrecision(4)), 2, PAD / 2 + 4);
  ctx.fillText(String(+ymin.toPrecision(4)), 2, h - PAD);
  ctx.fillText(String(xmax), w - PAD, h - PAD + 14);
  return { ctx, x, y };
}

function line(p, xs, ys, color) {
  p.ctx.strokeStyle = color;
  p.ctx.beginPath();
  ys.forEach((v, i) => (i ? p.ctx.lineTo(p.x(xs[i]), p.y(v)) : p.ctx.moveTo(p.x(xs[i]), p.y(v))));
  p.ctx.stroke();
}

function guard(info, f) {
  try {
    info.textContent = "";
    info.className = "";
    f();
  } catch (e) {
    info.textContent = String(e.message ?? e);
    info.className = "err";
  }
}

function runAdapt() {
  guard($("a-info"), () => {
    const d = JSON.parse(adaptation_demo(num("a-seed"), num("a-engine"), num("a-resets"), num("a-noise")));
    const canvas = $("a-canvas");
    const band = canvas.height / d.sensors.length;
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const cycles = Array.from({ length: d.cycles }, (_, i) => i + 1);
    d.sensors.forEach((s, k) => {
      const vals = s.raw.concat(s.adapted, [s.threshold]);
      const lo = Math.min(...vals), hi = Math.max(...vals);
      const x = (v) => PAD + (v / d.cycles) * (canvas.width - 1.5 * PAD);
      const y = (v) => k * band + band - 12 - ((v - lo) / (hi - lo || 1)) * (band - 24);
      const p = { ctx, x, y };
      line(p, cycles, s.raw, "#999");
      line(p, cycles, s.adapted, "#1f77b4");
      line(p, [1, d.cycles], [s.threshold, s.threshold], "#d62728");
      ctx.fillStyle = "#000";
      ctx.fillText(`sensor ${s.sensor_id}`, 2, k * band + 14);
      ctx.strokeStyle = "#2ca02c";
      for (const r of d.resets) {
        ctx.beginPath();
        ctx.moveTo(x(r.cycle), k * band + 4);
        ctx.lineTo(x(r.cycle), k * band + band - 4);
        ctx.stroke();
      }
    });
    const kinds = d.resets.map((r) => `${r.cycle} (${r.kind})`).join(", ") || "none";
    $("a-info").textContent = `${d.cycles} cycles; crossings at ${d.crossings.join(", ") || "none"}; resets at ${kinds}`;
  });
}

function runSweep() {
  guard($("s-info"), () => {
    const d = JSON.parse(policy_sweep(num("s-seed"), num("s-window"), num("s-margin"), num("s-cal"), num("s-vio")));
    const m = d.margins;
    const pred = d.predictive.map((o) => o.cost);
    const orc = d.oracle.map((o) => o.cost);
    const all = pred.concat(orc, [d.reactive.cost, d.fixed.cost]);
    const p = frame($("s-canvas"), m[m.length - 1], 0, Math.max(...all) * 1.05);
    line(p, m, pred, "#1f77b4");
    line(p, m, orc, "#2ca02c");
    line(p, [0, m[m.length - 1]], [d.reactive.cost, d.reactive.cost], "#d62728");
    line(p, [0, m[m.length - 1]], [d.fixed.cost, d.fixed.cost], "#ff7f0e");
    const best = pred.indexOf(Math.min(...pred));
    $("s-info").textContent =
      `fixed period ${d.period}; cheapest ridge margin ${m[best]} (cost ${pred[best]}, ` +
      `${d.predictive[best].n_vio} violations); reactive ${d.reactive.cost}, fixed ${d.fixed.cost}`;
  });
}

function runLr() {
  guard($("l-info"), () => {
    const d = JSON.parse(lr_schedule(num("l-base"), num("l-warmup"), num("l-total")));
    const steps = d.lr.map((_, i) => i + 1);
    const p = frame($("l-canvas"), d.steps, 0, Math.max(...d.lr));
    line(p, steps, d.lr, "#1f77b4");
  });
}

await init();
$("a-run").onclick = runAdapt;
$("s-run").onclick = runSweep;
$("l-run").onclick = runLr;
runAdapt();
runSweep();
runLr();
