// Entry point: wire the session machine to the DOM and keyboard.
import { ApiClient } from "./api.js";
import { SessionMachine } from "./state.js";
import { render } from "./view.js";
const root = document.getElementById("app");
if (!root)
    throw new Error("missing #app mount point");
const api = new ApiClient("", (input, init) => fetch(input, init));
const machine = new SessionMachine(api, (state) => render(root, state, actions));
const actions = {
    choose: (label) => machine.choose(label),
    retry: () => machine.retry(),
    checkpoint: () => {
        void machine.checkpoint();
    },
};
document.addEventListener("keydown", (event) => {
    if (event.repeat || event.metaKey || event.ctrlKey || event.altKey)
        return;
    switch (event.key) {
        case "p":
        case "P":
            machine.choose(1);
            break;
        case "n":
        case "N":
            machine.choose(-1);
            break;
        case "r":
        case "R":
            if (machine.view().phase === "error")
                machine.retry();
            break;
        case "c":
        case "C":
            void machine.checkpoint();
            break;
    }
});
void machine.start();
