import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

// Single base-URL setting: ?api=http://host:port, default local service.
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://localhost:8080";

const root = document.getElementById("app");
if (root) {
  void createApp(root, new ApiClient(baseUrl)).start();
}
