import init, { phase_portrait, residue_curve, nch_curve } from "./pkg/kamcrit_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, fn) {
  const msg = $(id);
  msg.className = "note";
  msg.textContent = "working...";
  // let the message paint before the computation blocks
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const extra = fn();
      msg.textContent = `${(performance.now() - t0).toFixed(0)} ms${extra ? "; " + extra : ""}`;
    } catch (e) {
      msg.className = "err";
      msg.textContent = String(e.message ?? e);
    }
  }, 10);
}

function drawPortrait() {
  const pts = phase_portrait(num("pK"), num("pSeeds"), num("pIters"));
  const cv = $("portrait");
  const g = cv.getContext("2d");
  g.fillStyle = "#fff";
  g.fillRect(0, 0, cv.width, cv.height);
  const seeds = num("pSeeds");
  const per = pts.length / 2 / seeds;
  for (let s = 0; s < seeds; s++) {
    g.fillStyle = `hsl(${(360 * s) / seeds}, 70%, 40%)`;
    for (let i = 0; i < per; i++) {
      const j = 2 * (s * per + i);
      const x = ((pts[j] + Math.PI) / (2 * Math.PI)) * cv.width;
      const y = cv.height - (pts[j + 1] / (2 * Math.PI)) * cv.height;
      g.fillRect(x, y, 1, 1);
    }
  }
  return `${pts.length / 2} points`;
}

function plot(canvas, xs, ys, opts) {
  const g = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 40;
  g.fillStyle = "#fff";
  g.fillRect(0, 0, W, H);
  if (xs.length === 0) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = Math.min(...ys, ...(opts.hlines ?? [])), y1 = Math.max(...ys, ...(opts.hlines ?? []));
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((y - y0) / (y1 - y0)) * (H - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  g.fillStyle = "#444";
  g.fillText(x0.toFixed(2), pad, H - pad + 14);
  g.fillText(x1.toFixed(2), W - pad - 24, H - pad + 14);
  g.fillText(y1.toPrecision(3), 2, pad + 4);
  g.fillText(y0.toPrecision(3), 2, H - pad);
  g.fillText(opts.xlabel, W / 2, H - 8);
  g.fillText(opts.ylabel, pad + 4, pad - 8);
  g.setLineDash([4, 4]);
  for (const h of opts.hlines ?? []) {
    g.beginPath();
    g.moveTo(pad, sy(h));
    g.lineTo(W - pad, sy(h));
    g.stroke();
  }
  for (const v of opts.vlines ?? []) {
    if (v < x0 || v > x1) continue;
    g.beginPath();
    g.moveTo(sx(v), pad);
    g.lineTo(sx(v), H - pad);
    g.stroke();
  }
  g.setLineDash([]);
  g.strokeStyle = "#1f5fbf";
  g.lineWidth = 2;
  g.beginPath();
  xs.forEach((x, i) => (i ? g.lineTo(sx(x), sy(ys[i])) : g.moveTo(sx(x), sy(ys[i]))));
  g.stroke();
  g.lineWidth = 1;
}

function drawResidue() {
  const r = JSON.parse(residue_curve(num("rM"), num("rN"), num("rK0"), num("rK1"), 121));
  const vlines = r.K_star === null ? [] : [r.K_star];
  plot($("residue"), r.K, r.residue, { xlabel: "K", ylabel: "residue", hlines: [0, 1], vlines });
  return r.K_star === null ? "no threshold found" : `residue reaches 1 at K* = ${r.K_star.toFixed(6)}`;
}

function drawDistance() {
  const r = JSON.parse(nch_curve(num("dM"), num("dN"), num("dK0"), num("dK1"), 71));
  plot($("distance"), r.K, r.d, { xlabel: "K", ylabel: "min matched distance", vlines: [0.9716] });
  const i = r.d.indexOf(Math.min(...r.d));
  return `minimum ${r.d[i].toFixed(5)} at K = ${r.K[i].toFixed(3)}`;
}

await init();
$("pGo").onclick = () => report("pMsg", drawPortrait);
$("rGo").onclick = () => report("rMsg", drawResidue);
$("dGo").onclick = () => report("dMsg", drawDistance);
report("pMsg", drawPortrait);
report("rMsg", drawResidue);
report("dMsg", drawDistance);
