import { PodSentryClient } from "./api.js";
import { App } from "./app.js";
import type { ViewSurface } from "./app.js";
import type { DiagnosisDoc, FeedbackVerdict } from "./types.js";

const FIXTURE_DOC = "fixtures/golden_diagnosis.json";
const FIXTURE_IMAGE = "fixtures/golden_image.png";

function mustFind<T extends Element>(selector: string): T {
  const element = document.querySelector<T>(selector);
  if (element === null) {
    throw new Error(`missing element: ${selector}`);
  }
  return element;
}

function start(): void {
  const view = mustFind<HTMLElement>("#view");
  const busy = mustFind<HTMLElement>("#busy");
  const input = mustFind<HTMLInputElement>("#upload");
  const fixtureButton = mustFind<HTMLButtonElement>("#fixture-demo");

  const surface: ViewSurface = {
    show(html) {
      view.innerHTML = html;
    },
    setBusy(isBusy) {
      busy.hidden = !isBusy;
    },
    setPodStatus(podIndex, text) {
      const status = view.querySelector<HTMLElement>(`[data-pod-status="${podIndex ?? ""}"]`);
      if (status !== null) {
        status.textContent = text;
      }
    },
  };

  const client = new PodSentryClient("");
  const app = new App(client, surface);

  input.addEventListener("change", () => {
    for (const file of input.files ?? []) {
      void app.upload(file);
    }
    input.value = "";
  });

  view.addEventListener("click", (event) => {
    const target = event.target as Element | null;
    const feedback = target?.closest<HTMLElement>("[data-feedback]");
    if (feedback !== null && feedback !== undefined) {
      const verdict = feedback.dataset.feedback as FeedbackVerdict;
      const pod = Number(feedback.dataset.pod);
      void app.submitFeedback(verdict, Number.isFinite(pod) ? pod : null);
      return;
    }
    if (target?.closest("[data-retry]")) {
      void app.retry();
    }
  });

  fixtureButton.addEventListener("click", async () => {
    const response = await fetch(FIXTURE_DOC);
    const doc = (await response.json()) as DiagnosisDoc;
    app.showFixture(doc, FIXTURE_IMAGE);
  });
}

start();
