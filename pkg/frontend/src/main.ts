/** Entry point: pick the API base URL and mount the dashboard.
 *
 * The base URL comes from the `api` query parameter when present
 * (`index.html?api=http://127.0.0.1:9000`), falling back to the
 * service's default local address.
 */

import { ThreatgenClient } from "./api.js";
import { App } from "./app.js";

const DEFAULT_API = "http://127.0.0.1:8172";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? DEFAULT_API;
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("index.html must contain <div id=\"app\">");
}
void new App(new ThreatgenClient(apiBase()), root).start();
