import { HttpApi } from "./api";
import { clear, el } from "./dom";
import { createBatchView } from "./views/batch";
import { createConfigView } from "./views/config";
import { createSingleView } from "./views/single";
import { createTestingView } from "./views/testing";
import "./styles.css";

const api = new HttpApi();

const single = createSingleView(api);
const batch = createBatchView({
  api,
  onOpenRun: (record) => {
    single.showRecord(record);
    activate("single");
  },
});
const testing = createTestingView(api);
const config = createConfigView(api);

const tabs: Record<string, HTMLElement> = {
  single: single.element,
  batch: batch.element,
  testing: testing.element,
  config: config.element,
};

const nav = el("nav", { class: "tabs" });
const content = el("main", { class: "content" });

function activate(name: string): void {
  clear(content);
  content.append(tabs[name] ?? tabs.single);
  for (const link of Array.from(nav.querySelectorAll("a"))) {
    link.classList.toggle("active", link.dataset.tab === name);
  }
  if (location.hash !== `#${name}`) history.replaceState(null, "", `#${name}`);
}

for (const name of Object.keys(tabs)) {
  const link = el("a", { href: `#${name}`, "data-tab": name }, name);
  link.addEventListener("click", (event) => {
    event.preventDefault();
    activate(name);
  });
  nav.append(link);
}

document.body.append(
  el("header", { class: "topbar" }, el("h1", {}, "nl2rego console"), nav),
  content,
);

activate(location.hash.replace("#", "") || "single");
