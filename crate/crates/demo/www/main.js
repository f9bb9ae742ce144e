import init, { Demo, render_primitive, primitive_areas } from "./pkg/patchsearch_demo.js";

const COLORS = ["#e33", "#3a3", "#36e", "#e9e"];
const $ = (id) => document.getElementById(id);
let demo = null;
let running = false;

function blit(canvas, rgba, w, h) {
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  return ctx;
}

function drawBoxes(ctx, flat, target) {
  ctx.lineWidth = 0.6;
  for (let i = 0; i < flat.length; i += 6) {
    const [x1, y1, x2, y2, c] = flat.slice(i, i + 5);
    ctx.strokeStyle = COLORS[c % COLORS.length];
    ctx.strokeRect(x1, y1, x2 - x1, y2 - y1);
  }
  ctx.setLineDash([1.5, 1.5]);
  ctx.strokeStyle = "#fff";
  ctx.strokeRect(target[0], target[1], target[2] - target[0], target[3] - target[1]);
  ctx.setLineDash([]);
}

function drawPrimitive() {
  const v = ["cx", "cy", "sx", "sy", "alpha"].map((id) => parseFloat($(id).value));
  blit($("prim"), render_primitive(64, ...v), 64, 64);
  const [analytic, pixels] = primitive_areas(64, ...v);
  $("prim-stats").textContent =
    `analytic area   ${analytic.toFixed(1)}\npixels > 0.5    ${pixels}`;
}

function drawScene() {
  if (!demo) return;
  const [w, h] = [demo.width(), demo.height()];
  const target = demo.target();
  drawBoxes(blit($("clean"), demo.clean_rgba(), w, h), demo.clean_detections(), target);
  drawBoxes(blit($("adv"), demo.adversarial_rgba(), w, h), demo.adversarial_detections(), target);
  blit($("mask"), demo.mask_rgba(), w, h);
  const best = demo.best_area_ratio();
  $("attack-stats").textContent = [
    `target          ${demo.category_name(target[4])}`,
    `step            ${demo.steps()} / ${demo.max_steps()}`,
    `success         ${demo.success()}`,
    `area ratio      ${demo.area_ratio().toFixed(4)}`,
    `best success    ${best < 0 ? "-" : best.toFixed(4)}`,
    `attack loss     ${demo.attack_loss().toFixed(4)}`,
  ].join("\n");
}

function load() {
  running = false;
  try {
    demo = new Demo(BigInt($("seed").value), $("task").value, $("strategy").value, parseInt($("nprim").value));
  } catch (e) {
    $("attack-stats").textContent = `error: ${e}`;
    demo = null;
    return;
  }
  drawScene();
}

function runToEnd() {
  if (!demo || running) return;
  running = true;
  const tick = () => {
    if (!running || !demo) return;
    demo.step(20);
    drawScene();
    if (demo.steps() < demo.max_steps()) requestAnimationFrame(tick);
    else running = false;
  };
  tick();
}

await init();
for (const id of ["cx", "cy", "sx", "sy", "alpha"]) $(id).addEventListener("input", drawPrimitive);
$("load").addEventListener("click", load);
$("run").addEventListener("click", runToEnd);
for (const b of document.querySelectorAll("button[data-steps]")) {
  b.addEventListener("click", () => {
    if (!demo) return;
    running = false;
    demo.step(parseInt(b.dataset.steps));
    drawScene();
  });
}
drawPrimitive();
load();
