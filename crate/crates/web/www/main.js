import init, { jumpTrajectory, nojumpCurve, classifyRegime } from "./pkg/qutrit_feedback_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, xs, series, markers = []) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const xmax = xs[xs.length - 1] || 1;
  const ymax = Math.max(1, ...series.flatMap((s) => s.ys));
  const X = (x) => pad + (x / xmax) * (w - 2 * pad);
  const Y = (y) => h - pad - (y / ymax) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText("0", pad - 12, h - pad);
  ctx.fillText(ymax.toFixed(2), 2, pad + 4);
  ctx.fillText(xmax.toFixed(1), w - pad - 10, h - pad + 14);

  for (const m of markers) {
    ctx.strokeStyle = m.kind === "jump" ? "#d33" : "#3a3";
    ctx.beginPath();
    ctx.moveTo(X(m.time), pad);
    ctx.lineTo(X(m.time), h - pad);
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(X(xs[i]), Y(y)) : ctx.moveTo(X(xs[i]), Y(y))));
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = String(e);
  }
}

function runTrajectory() {
  guard("traj-out", () => {
    const r = JSON.parse(jumpTrajectory(num("tau"), num("eta"), num("dvar"), BigInt(num("seed")), num("tmax")));
    plot($("traj"), r.times, [{ ys: r.negativity, color: "#06c" }], r.events);
    const jumps = r.events.filter((e) => e.kind === "jump").length;
    $("traj-out").textContent =
      `time-averaged negativity ${r.time_averaged.toFixed(4)}; ${jumps} jumps, ` +
      `${r.events.length - jumps} feedback pulses (red: jump, green: feedback)`;
  });
}

function runCurve() {
  guard("curve-out", () => {
    const r = JSON.parse(nojumpCurve($("structure").value, num("a"), num("b"), num("c"), 15, 301));
    plot($("curve"), r.times, [
      { ys: r.propagated, color: "#06c" },
      { ys: r.closed_form, color: "#e80", dash: [4, 4] },
    ]);
    const last = r.propagated[r.propagated.length - 1];
    $("curve-out").textContent = `negativity at t = ${r.times[r.times.length - 1]}: ${last.toFixed(6)} (dashed: closed form)`;
  });
}

function runClassify() {
  guard("curve-out", () => {
    const r = JSON.parse(classifyRegime($("structure").value, num("a"), num("b"), num("c")));
    const n = r.sudden_changes === null ? "" : `${r.sudden_changes} sudden changes, `;
    $("curve-out").textContent =
      `normalized (${r.a.toFixed(4)}, ${r.b.toFixed(4)}, ${r.c.toFixed(4)}): ${n}${r.terminal}`;
  });
}

await init();
$("run-traj").onclick = runTrajectory;
$("run-curve").onclick = runCurve;
$("run-class").onclick = runClassify;
runTrajectory();
runCurve();
