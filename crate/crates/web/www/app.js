import init, { solve_tree, value_curve, bn_values } from "./pkg/sigsearch_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => Number(x.toPrecision(8)).toString();

function table(header, rows) {
  const head = `<tr>${header.map((h) => `<th>${h}</th>`).join("")}</tr>`;
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table>${head}${body}</table>`;
}

function guard(target, fn) {
  try {
    fn();
  } catch (err) {
    target.innerHTML = `<p class="error">${err.message ?? err}</p>`;
  }
}

function showSolution() {
  guard($("solution"), () => {
    const s = JSON.parse(solve_tree($("tree").value, $("p").value));
    const summary = table(["V", "D", "μ"], [[fmt(s.value), fmt(s.mean_depth), fmt(s.mu)]]);
    const leaves = table(["leaf", "depth", "λ̄"], s.lambda_bar.map((l) => [l.leaf, fmt(l.depth), fmt(l.mass)]));
    const nodes = s.branches.length
      ? table(["node", "favored", "β"], s.branches.map((b) => [b.node, b.favored, fmt(b.beta)]))
      : "";
    $("solution").innerHTML = summary + leaves + nodes;
  });
}

function showCurve() {
  const svg = $("curve");
  guard($("curve-error"), () => {
    const c = JSON.parse(value_curve($("tree").value, 200));
    const [w, h, pad] = [svg.width.baseVal.value, svg.height.baseVal.value, 40];
    const lo = Math.min(...c.mean_depth);
    const hi = c.mu;
    const x = (p) => pad + ((p - 0.5) / 0.5) * (w - 2 * pad);
    const y = (v) => h - pad - ((v - lo) / (hi - lo || 1)) * (h - 2 * pad);
    const path = (ys) => c.p.map((p, i) => `${i ? "L" : "M"}${x(p).toFixed(1)},${y(ys[i]).toFixed(1)}`).join("");
    const p = eval_p($("p").value);
    const marker = Number.isFinite(p) ? `<line x1="${x(p)}" x2="${x(p)}" y1="${pad}" y2="${h - pad}" stroke="#999" stroke-dasharray="4"/>` : "";
    svg.innerHTML = `
      <line x1="${pad}" y1="${h - pad}" x2="${w - pad}" y2="${h - pad}" stroke="#444"/>
      <line x1="${pad}" y1="${pad}" x2="${pad}" y2="${h - pad}" stroke="#444"/>
      <text x="${pad}" y="${h - 12}" font-size="12">0.5</text>
      <text x="${w - pad - 8}" y="${h - 12}" font-size="12">1</text>
      <text x="4" y="${y(hi) + 4}" font-size="12">${fmt(hi)}</text>
      <text x="4" y="${y(lo) + 4}" font-size="12">${fmt(lo)}</text>
      ${marker}
      <path d="${path(c.value)}" fill="none" stroke="#1565c0" stroke-width="2"/>
      <path d="${path(c.mean_depth)}" fill="none" stroke="#c62828" stroke-width="1.5"/>
      <text x="${w - pad - 90}" y="${pad}" font-size="12" fill="#1565c0">V(p)</text>
      <text x="${w - pad - 90}" y="${pad + 16}" font-size="12" fill="#c62828">D(p)</text>`;
    $("curve-error").innerHTML = "";
  });
}

function showBn() {
  guard($("bn"), () => {
    const rows = JSON.parse(bn_values(Number($("n-max").value), $("p").value));
    $("bn").innerHTML = table(["n", "leaf depth", "V"], rows.map((r) => [r.n, fmt(r.depth), fmt(r.value)]));
  });
}

function eval_p(text) {
  const [a, b] = text.split("/");
  return b === undefined ? Number(a) : Number(a) / Number(b);
}

function refresh() {
  showSolution();
  showCurve();
  showBn();
}

await init();
$("tree").addEventListener("input", refresh);
$("p").addEventListener("input", () => {
  $("p-slider").value = eval_p($("p").value);
  refresh();
});
$("p-slider").addEventListener("input", () => {
  $("p").value = $("p-slider").value;
  refresh();
});
$("n-max").addEventListener("input", showBn);
refresh();
