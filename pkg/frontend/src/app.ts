// Wires the API client, session controller and renderers to the page.

import { ApiClient } from "./api.js";
import { SessionController } from "./state.js";
import { renderControls, renderPosterior, renderTrace } from "./render.js";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function boot(base = ""): Promise<void> {
  const api = new ApiClient(base);
  const controller = new SessionController(api);
  const svg = byId<HTMLElement>("plot") as unknown as SVGSVGElement;
  const buttons = {
    same: byId<HTMLButtonElement>("answer-same"),
    different: byId<HTMLButtonElement>("answer-different"),
    skip: byId<HTMLButtonElement>("answer-skip"),
  };
  const status = byId<HTMLElement>("status");
  const trace = byId<HTMLElement>("trace");
  const axisInput = byId<HTMLSelectElement>("axis");
  let horizon = 1;
  let axis = 0;

  const info = await api.session();
  horizon = info.horizon;
  axisInput.replaceChildren(
    ...Array.from({ length: info.dims }, (_, i) => {
      const opt = document.createElement("option");
      opt.value = String(i);
      opt.textContent = `axis ${i + 1}`;
      return opt;
    }),
  );
  axisInput.addEventListener("change", () => {
    axis = Number(axisInput.value);
    redraw();
  });

  function redraw(): void {
    const s = controller.state;
    renderControls(buttons, status, s);
    renderTrace(trace, controller.uncertaintyTrace);
    if (s.posterior) renderPosterior(svg, s.posterior, s.query, horizon, axis);
  }

  controller.onChange(redraw);
  buttons.same.addEventListener("click", () => void controller.submit("same"));
  buttons.different.addEventListener("click", () => void controller.submit("different"));
  buttons.skip.addEventListener("click", () => void controller.skip());

  redraw();
  await controller.start();
}

if (typeof document !== "undefined" && document.getElementById("plot")) {
  void boot();
}
