import { App } from "./ui.js";

const app = new App();
void app.start();
