import init, { meanFrailtyCurve, profileCurve, lifeExpectancyForecast } from "./pkg/frailty_wasm.js";

const $ = (id) => document.getElementById(id);

// Line plot with axis labels at the ends; `series` is a list of [xs, ys, colour].
function plot(canvas, series, xLabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 45;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s[0]).filter(Number.isFinite);
  const ys = series.flatMap((s) => s[1]).filter(Number.isFinite);
  if (!xs.length || !ys.length) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = Math.min(...ys), y1 = Math.max(...ys);
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad + ((y0 - y) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(4), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(4), w - pad - 30, h - pad + 14);
  ctx.fillText(y1.toPrecision(5), 2, pad + 4);
  ctx.fillText(y0.toPrecision(5), 2, h - pad);
  ctx.fillText(xLabel, w / 2 - 10, h - 8);

  for (const [sx, sy, colour] of series) {
    ctx.strokeStyle = colour;
    ctx.lineWidth = 2;
    ctx.beginPath();
    let started = false;
    sx.forEach((x, i) => {
      if (!Number.isFinite(sy[i])) { started = false; return; }
      if (started) ctx.lineTo(px(x), py(sy[i])); else ctx.moveTo(px(x), py(sy[i]));
      started = true;
    });
    ctx.stroke();
  }
}

function guarded(errId, f) {
  return () => {
    try {
      f();
      $(errId).textContent = "";
    } catch (e) {
      $(errId).textContent = String(e.message ?? e);
    }
  };
}

const meanFrailty = guarded("mf-err", () => {
  const family = $("mf-family").value;
  const sigma2 = +$("mf-sigma2").value, alpha = +$("mf-alpha").value;
  $("mf-sigma2-v").textContent = sigma2.toFixed(2);
  $("mf-alpha-v").textContent = alpha.toFixed(2);
  $("mf-alpha").disabled = family !== "stable";
  const n = 200, hMax = 5;
  const hs = Array.from({ length: n }, (_, i) => (hMax * i) / (n - 1));
  const ys = Array.from(meanFrailtyCurve(family, sigma2, family === "stable" ? alpha : 0, hMax, n));
  plot($("mf-plot"), [[hs, ys, "#1f5fa8"]], "integrated hazard");
});

const profile = guarded("pr-err", () => {
  const truth = +$("pr-sigma2").value;
  $("pr-sigma2-v").textContent = truth.toFixed(2);
  const grid = Array.from({ length: 41 }, (_, i) => 0.025 * i);
  const ll = Array.from(profileCurve(truth, +$("pr-exposure").value, +$("pr-seed").value >>> 0, new Float64Array(grid)));
  const best = Math.max(...ll);
  plot($("pr-plot"), [[grid, ll.map((v) => v - best), "#a8321f"]], "sigma2");
});

const lifeExpectancy = guarded("le-err", () => {
  const sigma2 = +$("le-sigma2").value;
  $("le-sigma2-v").textContent = sigma2.toFixed(2);
  const age = +$("le-age").value;
  const split = (r) => [Array.from(r.slice(0, r.length / 2)), Array.from(r.slice(r.length / 2))];
  const [t, e] = split(lifeExpectancyForecast(sigma2, 40, age));
  const [t0, e0] = split(lifeExpectancyForecast(0, 40, age));
  plot($("le-plot"), [[t0, e0, "#999"], [t, e, "#2a8a3a"]], "year");
});

await init();
for (const id of ["mf-family", "mf-sigma2", "mf-alpha"]) $(id).addEventListener("input", meanFrailty);
for (const id of ["pr-sigma2", "pr-exposure", "pr-seed"]) $(id).addEventListener("change", profile);
$("pr-sigma2").addEventListener("input", () => ($("pr-sigma2-v").textContent = (+$("pr-sigma2").value).toFixed(2)));
for (const id of ["le-sigma2", "le-age"]) $(id).addEventListener("change", lifeExpectancy);
meanFrailty();
profile();
lifeExpectancy();
