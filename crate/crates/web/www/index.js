import init, { betaLimit, heatmap, proxyCurve, hierarchy } from "./pkg/indiv_probe_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function parse(text, target) {
  const v = JSON.parse(text);
  if (v.error) {
    target.innerHTML = `<span class="err">${v.error}</span>`;
    return null;
  }
  return v;
}

function drawHeatmap() {
  const beta = num("hm-beta");
  $("hm-beta-val").textContent = beta.toFixed(2);
  const info = $("hm-info");
  const h = parse(heatmap(beta, num("hm-noise"), num("hm-seed")), info);
  const ctx = $("hm-canvas").getContext("2d");
  ctx.clearRect(0, 0, 360, 360);
  if (!h) return;
  info.textContent = `raw distance range ${h.raw_min.toExponential(3)} to ${h.raw_max.toExponential(3)}`;
  const k = h.quantities.length;
  const cell = 320 / k;
  ctx.font = "11px sans-serif";
  h.values.forEach((row, i) => {
    row.forEach((v, j) => {
      const shade = Math.round(255 * (1 - v));
      ctx.fillStyle = `rgb(255, ${shade}, ${shade})`;
      ctx.fillRect(40 + j * cell, 40 + i * cell, cell, cell);
    });
    ctx.fillStyle = "#222";
    ctx.fillText(h.quantities[i], 20, 40 + (i + 0.6) * cell);
    ctx.fillText(h.quantities[i], 40 + (i + 0.35) * cell, 30);
  });
}

function drawCurve() {
  const info = $("pc-info");
  const pts = parse(proxyCurve(num("pc-noise"), num("pc-points"), 1), info);
  const c = $("pc-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (!pts) return;
  info.textContent = "line: closed form (noiseless); dots: measured class mean";
  const ys = pts.flatMap((p) => [p.closed_form, p.measured_mean]);
  const lo = Math.min(...ys), hi = Math.max(...ys);
  const x = (b) => 40 + (b / pts[pts.length - 1].beta) * (c.width - 60);
  const y = (v) => c.height - 30 - ((v - lo) / (hi - lo || 1)) * (c.height - 60);
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  pts.forEach((p, i) => (i ? ctx.lineTo(x(p.beta), y(p.closed_form)) : ctx.moveTo(x(p.beta), y(p.closed_form))));
  ctx.stroke();
  ctx.fillStyle = "#c33";
  pts.forEach((p) => ctx.fillRect(x(p.beta) - 2, y(p.measured_mean) - 2, 4, 4));
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toFixed(4), 2, y(hi) + 4);
  ctx.fillText(lo.toFixed(4), 2, y(lo));
  ctx.fillText(`beta 0 .. ${pts[pts.length - 1].beta.toFixed(3)}`, c.width / 2 - 40, c.height - 8);
}

function runHierarchy() {
  const out = $("hi-out");
  const v = parse(hierarchy(num("hi-beta"), $("hi-mult").value, num("hi-noise"), 1, num("hi-alpha")), out);
  if (!v) return;
  const rows = v.classes
    .map((c) => `<tr><td>${c.category}</td><td>${c.beta.toFixed(3)}</td><td>${c.mean.toFixed(5)}</td><td>${c.std.toFixed(5)}</td></tr>`)
    .join("");
  const head = v.order.map((c) => `<th>${c}</th>`).join("");
  const matrix = v.pvalues
    .map((r, i) => `<tr><th>${v.order[i]}</th>${r.map((p) => `<td>${p.toExponential(2)}</td>`).join("")}</tr>`)
    .join("");
  out.innerHTML =
    `<table><tr><th>class</th><th>beta</th><th>mean</th><th>std</th></tr>${rows}</table>` +
    `<table><tr><th></th>${head}</tr>${matrix}</table>` +
    `<p>maximal cliques: ${v.cliques.map((c) => "{" + c.join(", ") + "}").join(" ")}</p>`;
}

await init();
$("hm-beta").max = (0.98 * betaLimit()).toFixed(3);
for (const id of ["hm-beta", "hm-noise", "hm-seed"]) $(id).addEventListener("input", drawHeatmap);
$("pc-run").addEventListener("click", drawCurve);
$("hi-run").addEventListener("click", runHierarchy);
drawHeatmap();
drawCurve();
runHierarchy();
