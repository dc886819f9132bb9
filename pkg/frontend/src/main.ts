/**
 * DOM wiring: canvas display, keyboard and mouse-drag navigation, world and
 * mode selectors, the refine button, and the status banner.
 */
import { RenderClient, RefineClient, RefineStatus } from "./api.js";
import { Pose } from "./pose.js";
import { KEY_BINDINGS, ViewerState, initialState, navigate } from "./state.js";

const SERVICE_URL = (window as unknown as { SPLATROAM_URL?: string }).SPLATROAM_URL ?? "";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startViewer(startPose?: Pose): void {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const banner = el<HTMLDivElement>("banner");
  const worldSelect = el<HTMLSelectElement>("world");
  const modeSelect = el<HTMLSelectElement>("mode");
  const refineButton = el<HTMLButtonElement>("refine");
  const restorerSelect = el<HTMLSelectElement>("restorer");

  let state: ViewerState = initialState(startPose);

  const renderClient = new RenderClient(
    SERVICE_URL,
    (frame) => {
      void createImageBitmap(frame.blob).then((bmp) => {
        canvas.width = bmp.width;
        canvas.height = bmp.height;
        ctx.drawImage(bmp, 0, 0);
      });
    },
    (message) => showBanner(message, true),
  );
  const refineClient = new RefineClient(SERVICE_URL);

  function showBanner(message: string, isError = false): void {
    banner.textContent = message;
    banner.className = isError ? "banner error" : "banner";
  }

  function wantFrame(): void {
    renderClient.requestFrame({ pose: state.pose, world: state.world, mode: state.mode });
  }

  function updateRefineButton(): void {
    refineButton.disabled = state.trajectory.length === 0 || state.jobStatus === "running";
  }

  window.addEventListener("keydown", (e) => {
    const binding = KEY_BINDINGS[e.key];
    if (!binding) return;
    e.preventDefault();
    state = navigate(state, binding);
    updateRefineButton();
    wantFrame();
  });

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  });
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    const dx = e.clientX - lastX;
    const dy = e.clientY - lastY;
    lastX = e.clientX;
    lastY = e.clientY;
    if (dx !== 0) state = navigate(state, { kind: "yaw", amount: dx * 0.05 });
    if (dy !== 0) state = navigate(state, { kind: "pitch", amount: dy * 0.05 });
    updateRefineButton();
    wantFrame();
  });

  worldSelect.addEventListener("change", () => {
    state = { ...state, world: worldSelect.value };
    wantFrame();
  });
  modeSelect.addEventListener("change", () => {
    state = { ...state, mode: modeSelect.value as ViewerState["mode"] };
    showBanner(state.mode === "compare" ? "compare: coarse | refined" : "");
    wantFrame();
  });

  refineButton.addEventListener("click", () => {
    if (refineButton.disabled) return;
    state = { ...state, jobStatus: "running" };
    updateRefineButton();
    showBanner("refinement running ...");
    refineClient
      .refineHere(state, restorerSelect.value, 2, (s: RefineStatus) =>
        showBanner(`refinement ${s.status}: iteration ${s.progress}/${s.total_iters}`),
      )
      .then(async (s) => {
        state = { ...state, jobStatus: s.status };
        if (s.status === "done") {
          const worlds = await refineClient.worlds();
          if (worlds.includes("refined")) {
            state = { ...state, world: "refined" };
            worldSelect.value = "refined";
          }
          showBanner("refinement done");
        } else {
          showBanner(`refinement failed: ${s.error}`, true);
        }
        updateRefineButton();
        wantFrame(); // the user sees the improvement from where they stand
      })
      .catch((err) => {
        state = { ...state, jobStatus: "failed" };
        updateRefineButton();
        showBanner(String(err), true);
      });
  });

  void refineClient
    .worlds()
    .then((worlds) => {
      worldSelect.replaceChildren(
        ...worlds.map((w) => {
          const opt = document.createElement("option");
          opt.value = w;
          opt.textContent = w;
          return opt;
        }),
      );
      if (worlds.includes("coarse")) worldSelect.value = "coarse";
      state = { ...state, world: worldSelect.value };
      updateRefineButton();
      wantFrame();
    })
    .catch((err) => showBanner(String(err), true));
}

declare global {
  interface Window {
    startViewer: typeof startViewer;
  }
}
window.startViewer = startViewer;
