import init, { basins_rgba, power_trajectory, eigenpairs_json } from "./pkg/tpm_demo.js";

const $ = (id) => document.getElementById(id);
const basins = $("basins");
const overlay = $("overlay");
const octx = overlay.getContext("2d");

function fmtComplex([re, im], digits = 6) {
  if (im === 0) return re.toFixed(digits);
  const sign = im < 0 ? "-" : "+";
  return `${re.toFixed(digits)}${sign}${Math.abs(im).toFixed(digits)}i`;
}

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function render() {
  showError(null);
  const d = Number($("order").value);
  const res = Number($("res").value);
  const iters = Number($("iters").value);
  $("status").textContent = "rendering...";
  // Let the status line paint before the synchronous render.
  requestAnimationFrame(() => setTimeout(() => {
    try {
      const t0 = performance.now();
      const px = basins_rgba(d, res, iters);
      basins.width = res;
      basins.height = res;
      basins.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(px), res, res), 0, 0);
      $("status").textContent = `d = ${d}, ${res}² pixels in ${(performance.now() - t0).toFixed(0)} ms`;
    } catch (e) {
      $("status").textContent = "";
      showError(e);
    }
    octx.clearRect(0, 0, overlay.width, overlay.height);
    table(d);
  }, 0));
}

function table(d) {
  const g = $("generators").tBodies[0];
  const p = $("pairs").tBodies[0];
  g.innerHTML = "";
  p.innerHTML = "";
  let summary;
  try {
    summary = JSON.parse(eigenpairs_json(d));
  } catch (e) {
    showError(e);
    return;
  }
  for (const c of summary.generators) {
    const row = g.insertRow();
    const cells = c.error ? [`v${c.index}`, "", "", c.error] : [`v${c.index}`, c.mu.toFixed(9), c.rho.toFixed(9), c.verdict];
    for (const text of cells) row.insertCell().textContent = text;
  }
  if (summary.pairs === null) {
    p.insertRow().insertCell().textContent = "every direction is an eigenvector at this order";
    return;
  }
  for (const pair of summary.pairs) {
    const row = p.insertRow();
    const v = `(${fmtComplex(pair.vector[0], 4)}, ${fmtComplex(pair.vector[1], 4)})`;
    for (const text of [v, fmtComplex(pair.eigenvalue, 9), pair.multiplicity, pair.kind]) {
      row.insertCell().textContent = text;
    }
  }
}

function toCanvas([x, y]) {
  const s = overlay.width / 2;
  return [s + x * s, s - y * s];
}

function trace(ev) {
  const rect = overlay.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const y = 1 - ((ev.clientY - rect.top) / rect.height) * 2;
  if (x * x + y * y > 1) return;
  const d = Number($("order").value);
  let run;
  try {
    run = JSON.parse(power_trajectory(d, x, y, Number($("iters").value)));
  } catch (e) {
    showError(e);
    return;
  }
  octx.clearRect(0, 0, overlay.width, overlay.height);
  octx.strokeStyle = "#fff";
  octx.fillStyle = "#fff";
  octx.lineWidth = 2;
  octx.beginPath();
  octx.moveTo(...toCanvas([x, y]));
  for (const pt of run.points) octx.lineTo(...toCanvas(pt));
  octx.stroke();
  for (const pt of run.points) {
    const [cx, cy] = toCanvas(pt);
    octx.fillRect(cx - 2, cy - 2, 4, 4);
  }
  const limit = run.limit.kind === "frame"
    ? `${run.limit.sign < 0 ? "-" : "+"}v${run.limit.index}`
    : run.limit.kind;
  $("trajectory").textContent =
    `start (${x.toFixed(3)}, ${y.toFixed(3)}): ${run.converged ? "converged" : "not converged"} after ` +
    `${run.iterations} steps, limit ${limit}`;
}

await init();
for (let d = 3; d <= 12; d++) $("order").add(new Option(String(d), String(d), d === 6, d === 6));
$("render").addEventListener("click", render);
$("order").addEventListener("change", render);
overlay.addEventListener("click", trace);
render();
