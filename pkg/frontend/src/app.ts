/** Application shell: resolves the API base, mounts the two screens. */

import { VigilClient } from "./api.js";
import { mountConsole } from "./console.js";
import { mountOnboarding } from "./onboarding.js";

type Tab = "onboard" | "console";

export function resolveApiBase(win: Pick<Window, "location" | "localStorage">): string {
  const params = new URLSearchParams(win.location.search);
  const fromQuery = params.get("api");
  if (fromQuery) {
    win.localStorage.setItem("vigil.api", fromQuery);
    return fromQuery;
  }
  const stored = win.localStorage.getItem("vigil.api");
  if (stored) return stored;
  return win.location.origin;
}

export function mountApp(root: HTMLElement, client: VigilClient) {
  let tab: Tab = "onboard";
  let active: { stop?: () => void; [key: string]: unknown } | null = null;

  function render(): void {
    root.innerHTML = `
      <header class="topbar">
        <h1>Vigil</h1>
        <nav>
          <button data-tab="onboard" class="${tab === "onboard" ? "active" : ""}">Onboard</button>
          <button data-tab="console" class="${tab === "console" ? "active" : ""}">Console</button>
        </nav>
        <span class="api-base">${client.baseUrl}</span>
      </header>
      <main id="screen"></main>`;
    root.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((btn) => {
      btn.addEventListener("click", () => {
        if (btn.dataset.tab !== tab) {
          tab = btn.dataset.tab as Tab;
          mount();
        }
      });
    });
    mountScreen();
  }

  function mountScreen(): void {
    active?.stop?.();
    const screen = root.querySelector<HTMLElement>("#screen");
    if (!screen) return;
    active = tab === "onboard" ? mountOnboarding(screen, client) : mountConsole(screen, client);
  }

  function mount(): void {
    render();
  }

  mount();
  return {
    get tab() {
      return tab;
    },
    switchTo(next: Tab) {
      tab = next;
      mount();
    },
  };
}

// auto-mount when loaded as the page script; tests import and mount explicitly
if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = resolveApiBase(window);
  const token = new URLSearchParams(window.location.search).get("token");
  mountApp(document.getElementById("app") as HTMLElement, new VigilClient(base, token));
}
