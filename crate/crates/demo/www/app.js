import init, { group_stats, senses, overlap } from "./pkg/hatesense_demo.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => x.toFixed(3);
const bar = (x) => `<span class="bar" style="width:${Math.round(120 * x)}px"></span>`;

function show(out, f) {
  try {
    out.innerHTML = f();
  } catch (e) {
    out.innerHTML = `<p class="err">${e}</p>`;
  }
}

function renderStats() {
  show($("stats-out"), () => {
    const r = JSON.parse(group_stats($("stats-in").value));
    return `<table>
      <tr><td>groups</td><td>${r.groups}</td></tr>
      <tr><td>average</td><td>${fmt(r.average)}</td></tr>
      <tr><td>dispersion</td><td>${fmt(r.dispersion)}</td></tr>
      <tr><td>worst group</td><td>${r.min_group} (${fmt(r.min_accuracy)})</td></tr>
    </table>`;
  });
}

function renderSenses() {
  const t = parseFloat($("sense-temp").value);
  $("sense-temp-val").textContent = t.toFixed(2);
  show($("sense-out"), () => {
    const r = JSON.parse(senses($("sense-tokens").value, $("sense-classes").value, t));
    const rows = r.tokens.map((tok, i) =>
      `<tr><td>token ${i + 1}</td><td>${tok.cosine.map(fmt).join(" ")}</td>
       <td>${tok.distribution.map((p) => bar(p) + " " + fmt(p)).join("<br>")}</td><td>${tok.sense}</td></tr>`);
    return `<table><tr><th></th><th>cosine</th><th>distribution</th><th>sense</th></tr>${rows.join("")}</table>`;
  });
}

function renderOverlap() {
  const n = (id) => Math.max(0, parseInt($(id).value, 10) || 0);
  show($("ov-out"), () => {
    const r = JSON.parse(overlap(n("ov-seed"), n("ov-starve"), n("ov-lex"), n("ov-k"), n("ov-stop")));
    const rows = r.groups.map((g) =>
      `<tr><td>${g.group}</td><td>${g.train}</td><td>${g.test}</td><td>${g.shared}/${g.k}</td>
       <td>${bar(g.overlap)} ${fmt(g.overlap)}</td></tr>`);
    return `<p>${r.examples} examples</p><table><tr><th>group</th><th>train</th><th>test</th><th>shared</th><th>overlap</th></tr>${rows.join("")}</table>`;
  });
}

await init();
$("stats-in").addEventListener("input", renderStats);
for (const id of ["sense-tokens", "sense-classes", "sense-temp"]) $(id).addEventListener("input", renderSenses);
for (const id of ["ov-seed", "ov-starve", "ov-lex", "ov-k", "ov-stop"]) $(id).addEventListener("change", renderOverlap);
renderStats();
renderSenses();
renderOverlap();
