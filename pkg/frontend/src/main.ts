/** Entry point for the served page. */

import { GridgateUi } from "./ui.js";

function boot(): void {
  const ui = new GridgateUi(document);
  ui.mount();
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
