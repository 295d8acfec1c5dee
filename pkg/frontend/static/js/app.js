import { ApiError, TestClient } from "./api.js";
import { renderMolecule } from "./render.js";
const STORAGE_KEY = "molswap-session-id";
const client = new TestClient("");
const state = {
    sessionId: null,
    payload: null,
    selection: null,
    submitting: false,
    lastError: null,
};
function root() {
    return document.getElementById("app");
}
function show(screen, html) {
    root().dataset.screen = screen;
    root().innerHTML = html;
}
function startScreen() {
    show("start", `
    <section class="card intro">
      <h1>Which molecule is real?</h1>
      <p>You will see 20 pairs of molecules. Both share the same molecular
      formula; one comes from an established chemical database and one was
      generated by a machine-learning model. Pick the one you believe is the
      database molecule. There is no time limit, and you will only see your
      score at the end.</p>
      <label for="expertise">Your training in organic chemistry</label>
      <select id="expertise">
        <option value="high_school">High school</option>
        <option value="undergraduate">Undergraduate</option>
        <option value="postgraduate">Postgraduate</option>
      </select>
      <button id="start-button">Start the test</button>
    </section>`);
    const button = document.getElementById("start-button");
    button.addEventListener("click", async () => {
        button.disabled = true;
        const expertise = document.getElementById("expertise")
            .value;
        try {
            state.sessionId = await client.startSession(expertise);
            localStorage.setItem(STORAGE_KEY, state.sessionId);
            await loadRound();
        }
        catch (err) {
            errorScreen(err);
        }
    });
}
function progressBar(current, total) {
    const pct = Math.round(((current - 1) / total) * 100);
    return `
    <div class="progress">
      <div class="progress-track"><div class="progress-fill" style="width:${pct}%"></div></div>
      <span class="progress-text">Round ${current} of ${total}</span>
    </div>`;
}
function roundScreen(payload) {
    state.payload = payload;
    state.selection = null;
    show("round", `
    ${progressBar(payload.progress.current, payload.progress.total)}
    <p class="formula">Molecular formula: <strong>${payload.formula}</strong></p>
    <div class="pair">
      <div class="molecule-card" data-side="left">${renderMolecule(payload.left)}
        <button class="choose" data-side="left">This one is real</button>
      </div>
      <div class="molecule-card" data-side="right">${renderMolecule(payload.right)}
        <button class="choose" data-side="right">This one is real</button>
      </div>
    </div>
    <button id="submit-button" disabled>Submit answer</button>`);
    for (const button of Array.from(document.querySelectorAll(".choose"))) {
        button.addEventListener("click", () => {
            state.selection = button.dataset.side;
            for (const card of Array.from(document.querySelectorAll(".molecule-card"))) {
                card.classList.toggle("selected", card.dataset.side === state.selection);
            }
            document.getElementById("submit-button").disabled = false;
        });
    }
    const submit = document.getElementById("submit-button");
    submit.addEventListener("click", async () => {
        // double clicks send a single POST: the guard flips before the await
        if (state.submitting || state.selection === null || state.payload === null)
            return;
        state.submitting = true;
        submit.disabled = true;
        try {
            await client.answer(state.sessionId, state.payload.pair_id, state.selection);
            state.submitting = false;
            await loadRound();
        }
        catch (err) {
            state.submitting = false;
            errorScreen(err);
        }
    });
}
function resultScreen(result) {
    localStorage.removeItem(STORAGE_KEY);
    const rows = result.rounds
        .map((r) => `<li class="${r.correct ? "hit" : "miss"}">Round ${r.round}: ${r.correct ? "correct" : "missed"}</li>`)
        .join("");
    show("result", `
    <section class="card">
      <h1>Your score: ${result.correct} / ${result.total}</h1>
      <p>Accuracy ${(result.accuracy * 100).toFixed(0)}%. Random guessing
      scores about 50%.</p>
      <ol class="round-list">${rows}</ol>
      <button id="again-button">Take the test again</button>
    </section>`);
    document.getElementById("again-button").addEventListener("click", () => startScreen());
}
function errorScreen(err) {
    state.lastError = err instanceof Error ? err.message : String(err);
    show("error", `
    <section class="card error">
      <h1>Connection problem</h1>
      <p>${state.lastError}</p>
      <button id="retry-button">Retry</button>
    </section>`);
    document.getElementById("retry-button").addEventListener("click", () => resume());
}
async function loadRound() {
    if (!state.sessionId) {
        startScreen();
        return;
    }
    try {
        roundScreen(await client.currentRound(state.sessionId));
    }
    catch (err) {
        if (err instanceof ApiError && err.status === 409) {
            resultScreen(await client.result(state.sessionId));
            return;
        }
        if (err instanceof ApiError && err.status === 404) {
            localStorage.removeItem(STORAGE_KEY);
            startScreen();
            return;
        }
        errorScreen(err);
    }
}
/** Server-authoritative resume: a refresh re-fetches the current round. */
export async function resume() {
    state.sessionId = localStorage.getItem(STORAGE_KEY);
    await loadRound();
}
if (typeof document !== "undefined" && document.getElementById("app")) {
    void resume();
}
