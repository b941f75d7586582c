import { ApiClient } from "./api";
import { createApp } from "./app";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
createApp(root, { client: new ApiClient(base) });
