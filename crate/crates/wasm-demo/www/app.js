import init, { epc_curve, allocator_churn, figure_bars, default_knobs } from "./pkg/confbench_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (x) => (Math.abs(x) >= 1e6 ? x.toExponential(2) : x.toLocaleString(undefined, { maximumFractionDigits: 2 }));

function guard(f) {
  return () => {
    $("err").textContent = "";
    try { f(); } catch (e) { $("err").textContent = String(e.message ?? e); }
  };
}

function svg(w, h, body) {
  return `<svg width="${w}" height="${h}" viewBox="0 0 ${w} ${h}">${body}</svg>`;
}

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const tr = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

function runPaging() {
  const cap = num("p-cap");
  const pts = JSON.parse(epc_curve(cap, num("p-ratio"), 24, num("p-passes"), $("p-pattern").value));
  const W = 640, H = 240, L = 50, B = 30;
  const xmax = pts[pts.length - 1].working_set_mib;
  const ymax = Math.max(...pts.map((p) => p.cost_per_byte));
  const x = (v) => L + (v / xmax) * (W - L - 10);
  const y = (v) => H - B - (v / ymax) * (H - B - 10);
  const path = pts.map((p, i) => `${i ? "L" : "M"}${x(p.working_set_mib)},${y(p.cost_per_byte)}`).join("");
  $("p-chart").innerHTML = svg(W, H,
    `<line x1="${x(cap)}" x2="${x(cap)}" y1="10" y2="${H - B}" stroke="#999" stroke-dasharray="4"/>` +
    `<text x="${x(cap) + 4}" y="20">capacity</text>` +
    `<path d="${path}" fill="none" stroke="#2a6fdb" stroke-width="2"/>` +
    `<line x1="${L}" x2="${W - 10}" y1="${H - B}" y2="${H - B}" stroke="#333"/>` +
    `<line x1="${L}" x2="${L}" y1="10" y2="${H - B}" stroke="#333"/>` +
    `<text x="${W / 2}" y="${H - 8}">working set (MiB), max ${fmt(xmax)}</text>` +
    `<text x="4" y="14">cost/byte, max ${fmt(ymax)}</text>`);
  $("p-out").innerHTML = table(
    ["working set MiB", "EPC loads", "evictions", "cost / byte"],
    pts.filter((_, i) => i % 4 === 3).map((p) => [fmt(p.working_set_mib), p.epc_loads, p.epc_evictions, fmt(p.cost_per_byte)]));
}

function runChurn() {
  const res = JSON.parse(allocator_churn(num("c-rounds"), num("c-kib"), num("c-live"), num("c-cap"), num("c-seed")));
  const rows = res.map((r) => [r.allocator, r.pages_allocated, r.report.pages_zeroed, r.report.epc_evictions,
    r.report.peak_mapped_pages, fmt(r.report.zeroing_cost), fmt(r.report.paging_cost), fmt(r.report.accumulated_cost)]);
  const [a, m] = res;
  $("c-out").innerHTML = table(
    ["allocator", "pages allocated", "pages zeroed", "evictions", "peak mapped", "zeroing", "paging", "total"], rows) +
    `<p>MapHeavy / ArenaReuse total: <b>${fmt(m.report.accumulated_cost / a.report.accumulated_cost)}</b></p>`;
}

const KNOBS = [
  ["row_cost", "per row"],
  ["software_aes_per_byte", "software AES per byte"],
  ["hardware_aes_per_byte", "hardware AES per byte"],
  ["decompress_per_byte", "decompress per byte"],
  ["enclave_memory_scale", "enclave memory overhead x"],
];

const COLOURS = {
  "light-blue": "#9cc9f0", blue: "#2a6fdb", "light-green": "#a7dca0", green: "#3c9a3c", pink: "#f2a7c8",
  red: "#d33", "light-orange": "#f7c08a", "light-purple": "#c6a8e6", "dark-purple": "#5b2a86",
  yellow: "#e8d33a", orange: "#f08a24",
};

function runBars() {
  const knobs = {};
  for (const [k] of KNOBS) knobs[k] = num(`k-${k}`);
  const res = JSON.parse(figure_bars(JSON.stringify(knobs)));
  const W = 640, H = 260, L = 40, B = 70;
  const ymax = Math.max(2, ...res.bars.map((b) => b.ratio));
  const bw = (W - L) / res.bars.length;
  const y = (v) => H - B - (v / ymax) * (H - B - 10);
  const bars = res.bars.map((b, i) => {
    const x0 = L + i * bw + 4;
    return `<rect x="${x0}" y="${y(b.ratio)}" width="${bw - 8}" height="${y(0) - y(b.ratio)}" fill="${COLOURS[b.config] ?? "#888"}" stroke="#333"/>` +
      `<text x="${x0 + (bw - 8) / 2}" y="${y(b.ratio) - 3}" text-anchor="middle">${b.ratio.toFixed(2)}</text>` +
      `<text transform="translate(${x0 + bw / 2},${H - B + 8}) rotate(45)">${b.config}</text>`;
  }).join("");
  $("b-chart").innerHTML = svg(W, H,
    `<line x1="${L}" x2="${W}" y1="${y(1)}" y2="${y(1)}" stroke="#999" stroke-dasharray="4"/>` + bars +
    `<line x1="${L}" x2="${W}" y1="${y(0)}" y2="${y(0)}" stroke="#333"/>`);
  $("b-out").innerHTML = table(["check", "observed", "range", ""],
    res.checks.map((c) => [c.name, c.observed.toFixed(2), `${c.low.toFixed(2)}..${c.high == null ? "inf" : c.high.toFixed(2)}`,
      c.pass ? "pass" : '<span class="fail">FAIL</span>']));
}

await init();
const defaults = JSON.parse(default_knobs());
$("b-knobs").innerHTML = KNOBS.map(([k, label]) =>
  `<label>${label} <input id="k-${k}" type="number" min="0" step="any" value="${defaults[k] ?? 1}"></label>`).join("");
for (const [k] of KNOBS) $(`k-${k}`).addEventListener("input", guard(runBars));
$("p-run").addEventListener("click", guard(runPaging));
$("c-run").addEventListener("click", guard(runChurn));
guard(runPaging)();
guard(runChurn)();
guard(runBars)();
