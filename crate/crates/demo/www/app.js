import init, { Demo, star_signals, vscore_curve } from "./pkg/fbrank_demo.js";

const $ = (id) => document.getElementById(id);
const sliders = ["threshold", "topk", "n", "margin"];
let demo;
let titles = new Map();
let lastQuery = "";

function sliderLabels() {
  for (const id of sliders) {
    const v = $(id).value;
    $(`${id}-v`).textContent = id === "margin" && Number(v) < 0 ? "off" : v;
  }
}

function rank() {
  const query = $("query").value.trim();
  if (!query) return;
  lastQuery = query;
  let out;
  try {
    out = JSON.parse(demo.rank(
      query,
      Number($("threshold").value),
      Number($("topk").value),
      Number($("n").value),
      Number($("margin").value),
      $("use-feedback").checked,
      $("use-synthetic").checked,
    ));
  } catch (e) {
    $("status").textContent = String(e);
    return;
  }
  $("status").textContent =
    `${out.records.length} chunks, ${out.rounds} round(s), pool of ${out.pool_size}; ${demo.feedback_count()} feedback indicators stored`;
  const body = $("results").tBodies[0];
  body.replaceChildren();
  const seen = new Set();
  for (const r of out.records) {
    const tr = body.insertRow();
    const cite = tr.insertCell();
    if (!seen.has(r.doc_id)) {
      seen.add(r.doc_id);
      const box = document.createElement("input");
      box.type = "checkbox";
      box.value = r.doc_id;
      box.className = "cite";
      cite.append(box);
    }
    tr.insertCell().textContent = r.chunk_id;
    tr.insertCell().textContent = titles.get(r.doc_id) ?? "";
    const vote = tr.insertCell();
    vote.textContent = r.vote.toFixed(3);
    vote.className = r.vote > 0 ? "pos" : r.vote < 0 ? "neg" : "";
    tr.insertCell().textContent = r.rrf.toFixed(5);
    tr.insertCell().textContent = r.indicators
      .map((i) => `${i.signal > 0 ? "+" : ""}${i.signal} @ ${i.c.toFixed(2)} "${i.query}"`)
      .join("; ");
  }
}

function rate() {
  const docs = [...document.querySelectorAll("input.cite:checked")].map((b) => b.value);
  if (!lastQuery || docs.length === 0) {
    $("fb-status").textContent = "rank a query and tick at least one document first";
    return;
  }
  const stars = Number($("stars").value);
  try {
    const written = demo.add_feedback(lastQuery, stars, docs.join(","));
    const signals = JSON.parse(star_signals(stars, docs.length, true));
    $("fb-status").textContent = `${written} indicator(s) written`;
    $("signals").textContent = docs.map((d, i) => `${d}: ${signals[i]}`).join(", ");
  } catch (e) {
    $("fb-status").textContent = String(e);
  }
  rank();
}

function drawCurve() {
  const c = $("curve");
  const g = c.getContext("2d");
  const w = c.width, h = c.height, pad = 24;
  const x = (cos) => pad + ((cos + 1) / 2) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - 1 / 3) / (2 / 3)) * (h - 2 * pad);
  g.clearRect(0, 0, w, h);
  const t = Number($("threshold").value);
  const cosAtT = 2 - 1 / t;
  g.fillStyle = "#e8f3e8";
  g.fillRect(x(Math.max(-1, cosAtT)), pad, x(1) - x(Math.max(-1, cosAtT)), h - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  g.beginPath();
  JSON.parse(vscore_curve(80)).forEach(([cos, v], i) => (i ? g.lineTo(x(cos), y(v)) : g.moveTo(x(cos), y(v))));
  g.strokeStyle = "#1a5fb4";
  g.lineWidth = 2;
  g.stroke();
  g.fillStyle = "#555";
  g.font = "11px system-ui";
  g.fillText("cos -1", pad, h - 6);
  g.fillText("1", w - pad - 4, h - 6);
  g.fillText(`T = ${t.toFixed(2)}`, pad + 4, pad + 12);
}

async function main() {
  await init();
  demo = new Demo(40, 7);
  titles = new Map(JSON.parse(demo.documents()).map((d) => [d.doc_id, d.title]));
  for (const q of JSON.parse(demo.sample_queries(8, 3))) {
    const b = document.createElement("button");
    b.textContent = q.text;
    b.title = `from ${q.golden}`;
    b.onclick = () => { $("query").value = q.text; rank(); };
    $("samples").append(b);
  }
  $("status").textContent = `${titles.size} documents, ${demo.chunk_count()} chunks indexed`;
  for (const id of sliders) $(id).addEventListener("input", () => { sliderLabels(); drawCurve(); if (lastQuery) rank(); });
  for (const id of ["use-feedback", "use-synthetic"]) $(id).addEventListener("change", () => lastQuery && rank());
  $("run").onclick = rank;
  $("query").addEventListener("keydown", (e) => e.key === "Enter" && rank());
  $("rate").onclick = rate;
  $("clear").onclick = () => { demo.clear_feedback(); $("fb-status").textContent = "feedback cleared"; rank(); };
  sliderLabels();
  drawCurve();
}

main();
