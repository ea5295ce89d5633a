import init, { rule_tags, crf_explore, mine } from "./pkg/mder_web.js";

const $ = (id) => document.getElementById(id);

const SAMPLE_PAPERS = [
  { paper_id: "p1", year: 2015, methods: ["SVM", "CRF", "LSTM"], datasets: ["MNIST"] },
  { paper_id: "p2", year: 2015, methods: ["svm", "CRF", "LSTM"], datasets: ["UCI"] },
  { paper_id: "p3", year: 2015, methods: ["LSTM", "CNN"], datasets: ["MNIST"] },
  { paper_id: "p4", year: 2015, methods: ["LSTM", "CNN", "Attention"] },
  { paper_id: "p5", year: 2015, methods: ["SVM", "CRF"] },
  { paper_id: "p6", year: 2016, methods: ["CNN", "Attention"], datasets: ["ImageNet"] },
  { paper_id: "p7", year: 2016, methods: ["CNN", "Attention", "LSTM"] },
].map((p) => JSON.stringify(p)).join("\n");

function call(fn, ...args) {
  const out = JSON.parse(fn(...args));
  if (out.error) throw new Error(out.error);
  return out;
}

function show(el, render) {
  try {
    el.replaceChildren(render());
  } catch (e) {
    const p = document.createElement("p");
    p.className = "error";
    p.textContent = e.message;
    el.replaceChildren(p);
  }
}

function h(tag, props = {}, ...children) {
  const el = document.createElement(tag);
  Object.assign(el, props);
  el.append(...children);
  return el;
}

function runRuleTags() {
  show($("rt-out"), () => {
    const r = call(rule_tags, $("rt-text").value, $("rt-methods").value, $("rt-datasets").value, $("rt-blacklist").value);
    const row = h("div");
    r.chars.forEach((c, i) => {
      const tag = r.tags[i];
      const kind = tag.endsWith("-M") ? "M" : tag.endsWith("-D") ? "D" : tag;
      row.append(h("span", { className: kind }, c === " " ? " " : c, h("small", {}, tag)));
    });
    const list = h("ul", {}, ...r.spans.map((s) => h("li", {}, `${s.kind} [${s.start}, ${s.end}) ${s.surface}`)));
    const sizes = h("p", {}, `Lexicon: ${r.lexicon.methods} methods, ${r.lexicon.datasets} datasets, ${r.lexicon.blacklist} blacklisted.`);
    return h("div", {}, row, list, sizes);
  });
}

function runCrf() {
  show($("crf-out"), () => {
    const r = call(crf_explore, Number($("crf-seed").value), Number($("crf-len").value), Number($("crf-scale").value));
    const tags = r.labels.slice(0, 6);
    const table = h("table");
    table.append(h("tr", {}, h("th", {}, "t"), ...tags.map((t) => h("th", {}, t))));
    r.emissions.forEach((row, t) => {
      table.append(h("tr", {}, h("th", {}, String(t)), ...row.map((v, j) =>
        h("td", { className: r.viterbi.path[t] === tags[j] ? "on" : "" }, v.toFixed(2)))));
    });
    const trans = h("table");
    trans.append(h("tr", {}, h("th", {}, "from \\ to"), ...r.labels.map((t) => h("th", {}, t))));
    r.transitions.forEach((row, i) => {
      trans.append(h("tr", {}, h("th", {}, r.labels[i]), ...row.map((v) => h("td", {}, v === null ? "−∞" : v.toFixed(2)))));
    });
    const agree = r.viterbi.path.join(" ") === r.oracle.path.join(" ");
    const facts = h("ul", {},
      h("li", {}, `Viterbi path: ${r.viterbi.path.join(" ")} (score ${r.viterbi.score.toFixed(6)})`),
      h("li", {}, `Best of ${r.paths} enumerated paths: ${r.oracle.path.join(" ")} (score ${r.oracle.score.toFixed(6)}) ${agree ? "agrees" : "DISAGREES"}`),
      h("li", {}, `log Z: ${r.log_partition.toFixed(9)} (recursion), ${r.oracle_log_partition.toFixed(9)} (enumeration)`),
      h("li", {}, `P(best path) = ${r.best_path_probability.toFixed(4)}; total probability ${r.probability_mass.toFixed(12)}`));
    return h("div", {}, facts, h("h3", {}, "Emissions"), table, h("h3", {}, "Transitions"), trans);
  });
}

const SVG = "http://www.w3.org/2000/svg";
function svg(tag, attrs, text) {
  const el = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  if (text !== undefined) el.textContent = text;
  return el;
}

function drawGraph(graph) {
  const size = 320, mid = size / 2, radius = size / 2 - 50;
  const root = svg("svg", { width: size, height: size, viewBox: `0 0 ${size} ${size}` });
  const pos = new Map();
  const maxB = Math.max(1, ...graph.nodes.map((n) => n.betweenness || 0));
  graph.nodes.forEach((n, i) => {
    const a = (2 * Math.PI * i) / graph.nodes.length - Math.PI / 2;
    pos.set(n.id, [mid + radius * Math.cos(a), mid + radius * Math.sin(a)]);
  });
  for (const l of graph.links) {
    const [x1, y1] = pos.get(l.source), [x2, y2] = pos.get(l.target);
    root.append(svg("line", { x1, y1, x2, y2, stroke: "#888", "stroke-width": l.weight }));
    root.append(svg("text", { x: (x1 + x2) / 2, y: (y1 + y2) / 2, "font-size": 10, fill: "#b00" }, String(l.weight)));
  }
  for (const n of graph.nodes) {
    const [x, y] = pos.get(n.id);
    const r = 5 + 10 * ((n.betweenness || 0) / maxB);
    root.append(svg("circle", { cx: x, cy: y, r, fill: "#4a7bd0" }));
    root.append(svg("text", { x: x + r + 2, y: y + 4, "font-size": 12 }, n.id));
  }
  return root;
}

function runMine() {
  show($("mine-out"), () => {
    const r = call(mine, $("mine-in").value, Number($("mine-weight").value), Number($("mine-k").value));
    const out = h("div", {}, h("p", {}, `${r.papers} papers.`));
    for (const y of r.years) {
      const top = h("ol", {}, ...y.top.map((t) => h("li", {}, `${t.entity}: ${t.betweenness.toFixed(3)}`)));
      out.append(h("h3", {}, String(y.year)), drawGraph(y.graph), h("p", {}, "Top by betweenness (full graph):"), top);
    }
    return out;
  });
}

async function main() {
  await init();
  $("mine-in").value = SAMPLE_PAPERS;
  $("rt-run").onclick = runRuleTags;
  $("crf-run").onclick = runCrf;
  $("mine-run").onclick = runMine;
  $("status").textContent = "Ready.";
  runRuleTags();
  runCrf();
  runMine();
}

main().catch((e) => {
  $("status").textContent = `Failed to load: ${e.message}`;
  $("status").className = "error";
});
