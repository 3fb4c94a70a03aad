import { startConsole } from "./app.js";

const params = new URLSearchParams(location.search);
const gateway = params.get("gateway") ?? "ws://127.0.0.1:7703";
const operatorId = params.get("operator") ?? "op-1";

const root = document.getElementById("console");
if (root === null) {
  throw new Error("page has no #console element");
}
startConsole(root, { gateway, operatorId });
