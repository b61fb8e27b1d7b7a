import init, { cliff_exact, cliff_learned, grid_sample } from "./pkg/dqlab_demo.js";

const $ = (id) => document.getElementById(id);
const CELL = 40;
// Up, Down, Left, Right as screen offsets (row 0 is drawn at the bottom).
const DIRS = [[0, -1], [0, 1], [-1, 0], [1, 0]];

function shade(v, positive) {
  const t = Math.max(0, Math.min(1, Math.abs(v)));
  const c = Math.round(255 * (1 - t));
  return positive ? `rgb(${c},255,${c})` : `rgb(255,${c},${c})`;
}

function draw(canvas, view, key, positive) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const cell of view.cells) {
    const x = cell.col * CELL;
    const y = (view.height - 1 - cell.row) * CELL;
    ctx.fillStyle = cell.kind === "cliff" ? "#333" : cell.kind === "goal" ? "#ffd700" : shade(cell[key], positive);
    ctx.fillRect(x, y, CELL, CELL);
    ctx.strokeStyle = "#bbb";
    ctx.strokeRect(x, y, CELL, CELL);
    if (cell.kind === "cliff" || cell.kind === "goal") continue;
    const cx = x + CELL / 2, cy = y + CELL / 2;
    cell.safe.forEach((ok, a) => {
      if (!ok) return;
      ctx.strokeStyle = "#000";
      ctx.lineWidth = a === cell.greedy ? 3 : 1;
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(cx + DIRS[a][0] * CELL * 0.4, cy + DIRS[a][1] * CELL * 0.4);
      ctx.stroke();
    });
    ctx.lineWidth = 1;
  }
}

function renderCliff() {
  const gamma = parseFloat($("gamma").value);
  const tau = parseFloat($("tau").value);
  $("gamma-v").textContent = gamma.toFixed(2);
  $("tau-v").textContent = tau.toFixed(2);
  const json = $("source").value === "exact"
    ? cliff_exact(gamma, tau)
    : cliff_learned(parseInt($("episodes").value, 10) || 1, BigInt($("cliff-seed").value || 0), gamma, tau);
  const view = JSON.parse(json);
  if (view.error) {
    $("crashes").textContent = view.error;
    return;
  }
  draw($("env"), view, "v_env", false);
  draw($("task"), view, "v_task", true);
  $("crashes").textContent = view.crashes == null ? "" : `Crashes during training: ${view.crashes}.`;
}

function renderGrid() {
  const sample = JSON.parse(grid_sample(
    BigInt($("grid-seed").value || 0),
    parseFloat($("p-obstacle").value),
    parseFloat($("p-collectible").value),
  ));
  if (sample.error) {
    $("grid").textContent = "";
    $("grid-info").textContent = sample.error;
    return;
  }
  $("grid").textContent = sample.text;
  $("grid-info").textContent =
    `${sample.obstacles} obstacles, 3x3 window index ${sample.window_index}, ${sample.active_bits} active one-hot bits.`;
}

await init();
for (const id of ["gamma", "tau", "source", "episodes", "cliff-seed"]) $(id).addEventListener("input", renderCliff);
for (const id of ["grid-seed", "p-obstacle", "p-collectible"]) $(id).addEventListener("input", renderGrid);
renderCliff();
renderGrid();
