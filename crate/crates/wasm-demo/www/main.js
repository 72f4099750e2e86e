import init, { evaluateTable5, trainSynthetic, correlateSynthetic } from "./pkg/spforge_wasm.js";

const $ = (id) => document.getElementById(id);

function showError(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

// Heat-mapped confusion matrix: rows actual, columns predicted.
function drawConfusion(canvas, cm, title) {
  const ctx = canvas.getContext("2d");
  const n = cm.labels.length;
  const pad = 36, size = Math.min(canvas.width, canvas.height) - pad - 4, cell = size / n;
  const max = Math.max(1, ...cm.counts.flat());
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#222";
  ctx.fillText(title, 4, 12);
  for (let a = 0; a < n; a++) {
    ctx.fillStyle = "#222";
    ctx.fillText(cm.labels[a], pad - 14, pad + a * cell + cell / 2 + 4);
    ctx.fillText(cm.labels[a], pad + a * cell + cell / 2 - 3, pad - 6);
    for (let p = 0; p < n; p++) {
      const v = cm.counts[a][p];
      const shade = Math.round(255 - 200 * (v / max));
      ctx.fillStyle = a === p ? `rgb(${shade},${shade},255)` : `rgb(255,${shade},${shade})`;
      ctx.fillRect(pad + p * cell, pad + a * cell, cell - 1, cell - 1);
      ctx.fillStyle = "#000";
      ctx.fillText(String(v), pad + p * cell + cell / 2 - 4, pad + a * cell + cell / 2 + 4);
    }
  }
}

function drawLosses(canvas, series) {
  const ctx = canvas.getContext("2d");
  const pad = 30, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const rounds = Math.max(...series.map((s) => s.values.length));
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#222";
  ctx.fillText(`log-loss ${lo.toFixed(3)}–${hi.toFixed(3)} over ${rounds} rounds`, pad, pad - 8);
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dashed ? [4, 3] : []);
    ctx.beginPath();
    s.values.forEach((v, r) => {
      const x = pad + (rounds > 1 ? (r / (rounds - 1)) * w : 0);
      const y = pad + h - ((v - lo) / (hi - lo || 1)) * h;
      r === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, pad + 6, pad + 14 + 13 * i);
  });
}

function drawCorrelation(canvas, cm) {
  const ctx = canvas.getContext("2d");
  const n = cm.variables.length;
  const left = 190, top = 20, cell = Math.min((canvas.width - left) / n, (canvas.height - top) / n);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px sans-serif";
  for (let i = 0; i < n; i++) {
    ctx.fillStyle = "#222";
    ctx.fillText(cm.variables[i], 4, top + i * cell + cell / 2 + 4);
    ctx.fillText(`[${i}]`, left + i * cell + cell / 2 - 8, top - 6);
    for (let j = 0; j < n; j++) {
      const r = cm.matrix[i][j];
      const t = Math.round(255 * (1 - Math.abs(r)));
      ctx.fillStyle = r >= 0 ? `rgb(255,${t},${t})` : `rgb(${t},${t},255)`;
      ctx.fillRect(left + j * cell, top + i * cell, cell - 1, cell - 1);
      ctx.fillStyle = "#000";
      ctx.fillText(r.toFixed(2), left + j * cell + cell / 2 - 12, top + i * cell + cell / 2 + 4);
    }
  }
}

function params() {
  const p = {};
  for (const id of ["seed", "n_estimators", "max_depth"]) p[id] = parseInt($(id).value, 10);
  for (const id of ["text_signal", "image_signal", "severity_noise", "learning_rate", "test_fraction"]) {
    p[id] = parseFloat($(id).value);
  }
  return JSON.stringify(p);
}

function renderTable5() {
  const tol = parseInt($("tol").value, 10);
  $("tol-val").textContent = tol;
  try {
    const view = JSON.parse(evaluateTable5(tol));
    $("t5-out").textContent = view.table;
    drawConfusion($("t5-with"), view.diff.with_severity.confusion, "with severity");
    drawConfusion($("t5-without"), view.diff.without_severity.confusion, "without severity");
  } catch (e) {
    showError($("t5-out"), e);
  }
}

function runTraining() {
  const out = $("train-out");
  out.className = "";
  out.textContent = "training…";
  // Let the status text paint before the synchronous work starts.
  setTimeout(() => {
    try {
      const view = JSON.parse(trainSynthetic(params()));
      const o = view.outcome;
      drawLosses($("loss"), [
        { label: "train, with severity", values: o.with_severity.train_loss, color: "#c33" },
        { label: "valid, with severity", values: o.with_severity.valid_loss, color: "#c33", dashed: true },
        { label: "train, without severity", values: o.without_severity.train_loss, color: "#36c" },
        { label: "valid, without severity", values: o.without_severity.valid_loss, color: "#36c", dashed: true },
      ]);
      drawConfusion($("cm-with"), o.diff.with_severity.confusion, "with severity");
      drawConfusion($("cm-without"), o.diff.without_severity.confusion, "without severity");
      out.textContent =
        `best rounds: ${o.with_severity.best_round} (with), ${o.without_severity.best_round} (without); ` +
        `test stories: ${o.split.test.length}\n\n` + view.table;
    } catch (e) {
      showError(out, e);
    }
  }, 10);
}

function runCorrelation() {
  try {
    drawCorrelation($("corr-canvas"), JSON.parse(correlateSynthetic(params())));
  } catch (e) {
    showError($("train-out"), e);
  }
}

await init();
$("tol").addEventListener("input", renderTable5);
$("train").addEventListener("click", runTraining);
$("corr").addEventListener("click", runCorrelation);
renderTable5();
runCorrelation();
