import { PanelControls, wirePanel } from "./panel.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const controls: PanelControls = {
  summary: byId<HTMLInputElement>("f-summary"),
  description: byId<HTMLTextAreaElement>("f-description"),
  product: byId<HTMLInputElement>("f-product"),
  component: byId<HTMLInputElement>("f-component"),
  platform: byId<HTMLInputElement>("f-platform"),
  op_sys: byId<HTMLInputElement>("f-op-sys"),
  severity: byId<HTMLInputElement>("f-severity"),
  priority: byId<HTMLInputElement>("f-priority"),
  status: byId<HTMLInputElement>("f-status"),
  keywords: byId<HTMLInputElement>("f-keywords"),
  baseUrl: byId<HTMLInputElement>("f-base-url"),
  banner: byId("banner"),
  chips: byId("chips"),
  retry: byId("retry"),
  meta: byId("meta"),
  health: byId("health"),
};

const handle = wirePanel(controls);
void handle.pingHealth();
