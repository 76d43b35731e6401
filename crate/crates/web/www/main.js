import init, { cantor_spectrum, cantor_profile, hinge } from "./pkg/krein_feller_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function show(id, text, isError) {
  $(id).textContent = text;
  $(id).className = isError ? "err" : "";
}

// series: [{xs, ys, dots}]
function draw(canvas, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs), ys = series.flatMap((s) => s.ys);
  let [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  series.forEach((s, i) => {
    ctx.strokeStyle = ctx.fillStyle = COLORS[i % COLORS.length];
    if (s.dots) {
      s.xs.forEach((x, j) => ctx.fillRect(sx(x) - 2, sy(s.ys[j]) - 2, 4, 4));
      return;
    }
    ctx.beginPath();
    s.xs.forEach((x, j) => (j ? ctx.lineTo(sx(x), sy(s.ys[j])) : ctx.moveTo(sx(x), sy(s.ys[j]))));
    ctx.stroke();
  });
}

function runSpectrum() {
  try {
    const r = JSON.parse(cantor_spectrum(num("sp-p"), num("sp-level"), num("sp-k")));
    draw($("sp-traces"), r.traces.map((u) => ({ xs: r.x, ys: u })));
    const ev = r.eigenvalues;
    draw($("sp-weyl"), [{ xs: ev.map(Math.log), ys: ev.map((_, j) => Math.log(j + 1)), dots: true }]);
    const head = ev.slice(0, 8).map((v) => v.toPrecision(10)).join("\n");
    const fit = r.weyl_exponent === null ? r.weyl_note : r.weyl_exponent.toFixed(4);
    show("sp-out", `first eigenvalues\n${head}\ncounting exponent ${fit}${r.rank_note ? "\n" + r.rank_note : ""}`);
  } catch (e) {
    show("sp-out", String(e), true);
  }
}

function runProfile() {
  try {
    const r = JSON.parse(cantor_profile(num("pr-p"), num("pr-level"), num("pr-rmax"), num("pr-factor"), num("pr-count")));
    const keep = r.radii.map((_, j) => j).filter((j) => r.sup_mass[j] > 0);
    draw($("pr-plot"), [{ xs: keep.map((j) => Math.log(r.radii[j])), ys: keep.map((j) => Math.log(r.sup_mass[j])), dots: true }]);
    show("pr-out", `estimate [${r.lower.toFixed(4)}, ${r.upper.toFixed(4)}], slope ${r.slope.toFixed(4)}\nclosed form ${r.closed_form.toFixed(4)}`);
  } catch (e) {
    show("pr-out", String(e), true);
  }
}

function runHinge() {
  try {
    const r = JSON.parse(hinge(num("hg-a"), num("hg-b"), num("hg-alpha"), num("hg-r")));
    const fmt = (v) => (typeof v === "number" ? v.toPrecision(12) : v.error);
    show("hg-out", `α = ${num("hg-alpha").toFixed(4)}\nspherical  ${fmt(r.spherical)}\nflat       ${fmt(r.flat)}\nhyperbolic ${fmt(r.hyperbolic)}`);
  } catch (e) {
    show("hg-out", String(e), true);
  }
}

await init();
$("sp-run").onclick = runSpectrum;
$("pr-run").onclick = runProfile;
for (const id of ["hg-a", "hg-b", "hg-alpha", "hg-r"]) $(id).oninput = runHinge;
runSpectrum();
runProfile();
runHinge();
