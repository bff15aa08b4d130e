// Page bootstrap: service URL is configurable at load via ?api=... or a
// window-level override, defaulting to the local service port.

import { ApiClient } from "./api.js";
import { renderPanel } from "./panel.js";
import { ReviewSession } from "./session.js";

declare global {
  interface Window {
    VULNVEC_API?: string;
  }
}

function serviceUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? window.VULNVEC_API ?? "http://127.0.0.1:8077";
}

export function bootstrap(root: HTMLElement): ReviewSession {
  const client = new ApiClient(serviceUrl());
  const session = new ReviewSession(client);

  const form = document.createElement("div");
  form.className = "submit-form";
  const textarea = document.createElement("textarea");
  textarea.placeholder = "Paste one C function here";
  textarea.rows = 10;
  const submit = document.createElement("button");
  submit.textContent = "Analyze";
  const refresh = document.createElement("button");
  refresh.textContent = "Re-run prediction";
  refresh.disabled = true;
  form.append(textarea, submit, refresh);

  const panel = document.createElement("div");
  panel.className = "panel";
  root.append(form, panel);

  session.onChange(() => {
    submit.disabled = session.isBusy;
    refresh.disabled = session.isBusy || session.prediction === null;
    renderPanel(panel, session);
  });
  submit.addEventListener("click", () => {
    void session.submit(textarea.value);
  });
  refresh.addEventListener("click", () => {
    void session.refresh();
  });
  return session;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap(document.getElementById("app") as HTMLElement);
}
