import { DetectClient } from "./client";
import { EditorSession, localStorageThresholdStore, SessionState } from "./session";

const BLOCK_LINES = 10;

function trailingBlock(buffer: string): string {
  const lines = buffer.split("\n");
  return lines.slice(Math.max(0, lines.length - BLOCK_LINES)).join("\n");
}

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function mount(baseUrl: string): EditorSession {
  const client = new DetectClient(baseUrl);
  const session = new EditorSession({
    client,
    store: localStorageThresholdStore(window.localStorage),
  });

  const editor = requireElement<HTMLTextAreaElement>("editor");
  const language = requireElement<HTMLSelectElement>("language");
  const slider = requireElement<HTMLInputElement>("threshold");
  const sliderValue = requireElement<HTMLSpanElement>("threshold-value");
  const badge = requireElement<HTMLSpanElement>("badge");
  const detail = requireElement<HTMLDivElement>("detail");
  const block = requireElement<HTMLPreElement>("block-window");
  const banner = requireElement<HTMLDivElement>("offline-banner");

  slider.value = String(session.state.threshold);

  const render = (state: SessionState) => {
    badge.textContent =
      state.verdict === "vulnerable"
        ? `Vulnerable${state.lastResponse?.cwe ? ` (${state.lastResponse.cwe})` : ""}`
        : state.verdict === "clean"
          ? "Clean"
          : "—";
    badge.className = `badge ${state.verdict}`;
    sliderValue.textContent = state.threshold.toFixed(2);
    detail.textContent = state.lastResponse
      ? `score ${state.lastResponse.score.toFixed(4)} · model ${state.lastResponse.model_version} · ${state.lastResponse.elapsed_ms.toFixed(1)} ms`
      : "";
    block.textContent = trailingBlock(state.buffer);
    banner.hidden = !state.offline;
  };
  session.subscribe(render);
  render(session.state);

  editor.addEventListener("input", () => session.onEdit(editor.value));
  language.addEventListener("change", () => session.onLanguageChange(language.value));
  slider.addEventListener("input", () => session.onThresholdChange(Number(slider.value)));

  void client
    .health()
    .then(() => {
      banner.hidden = true;
    })
    .catch(() => {
      banner.hidden = false;
    });

  return session;
}

declare global {
  interface Window {
    EVD_SERVICE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
  mount(window.EVD_SERVICE_URL ?? "http://127.0.0.1:8077");
}
