/** DOM rendering: scene with the active segment's overlay, class grid, countdown. */

import { SKIPPED, TaskSession } from "./state.js";
import { fmssKey } from "./types.js";

export type ViewModel =
    | { kind: "loading" }
    | { kind: "idle" }
    | { kind: "error"; message: string }
    | { kind: "expired" }
    | { kind: "submitted"; accepted: number }
    | { kind: "task"; session: TaskSession; nowMs: number };

export interface ViewHandlers {
    onSelectClass(classId: number): void;
    onSkip(): void;
    onPrev(): void;
    onNext(): void;
    onSubmit(): void;
    onRetry(): void;
}

const PLACEHOLDER_OVERLAY =
    "data:image/svg+xml," +
    encodeURIComponent(
        '<svg xmlns="http://www.w3.org/2000/svg" width="4" height="3">' +
            '<rect width="4" height="3" fill="none" stroke="red"/></svg>',
    );

export function formatCountdown(ms: number): string {
    const total = Math.max(0, Math.floor(ms / 1000));
    const minutes = Math.floor(total / 60);
    const seconds = total % 60;
    return `${minutes}:${String(seconds).padStart(2, "0")}`;
}

export function render(root: HTMLElement, model: ViewModel, handlers: ViewHandlers): void {
    root.textContent = "";
    root.appendChild(buildView(root.ownerDocument, model, handlers));
}

function buildView(doc: Document, model: ViewModel, handlers: ViewHandlers): HTMLElement {
    switch (model.kind) {
        case "loading":
            return banner(doc, "loading", "Fetching task…");
        case "idle":
            return banner(doc, "idle", "No tasks available. Thanks for helping!");
        case "error": {
            const el = banner(doc, "error", `Service unavailable: ${model.message}`);
            const retry = doc.createElement("button");
            retry.className = "retry";
            retry.textContent = "Retry";
            retry.addEventListener("click", () => handlers.onRetry());
            el.appendChild(retry);
            return el;
        }
        case "expired": {
            const el = banner(
                doc,
                "expired",
                "Time is up — this task expired and its votes were discarded.",
            );
            const next = doc.createElement("button");
            next.className = "retry";
            next.textContent = "Fetch next task";
            next.addEventListener("click", () => handlers.onRetry());
            el.appendChild(next);
            return el;
        }
        case "submitted": {
            const el = banner(doc, "submitted", `Submitted ${model.accepted} votes.`);
            return el;
        }
        case "task":
            return taskView(doc, model.session, model.nowMs, handlers);
    }
}

function banner(doc: Document, kind: string, text: string): HTMLElement {
    const el = doc.createElement("div");
    el.className = `banner banner-${kind}`;
    const p = doc.createElement("p");
    p.textContent = text;
    el.appendChild(p);
    return el;
}

function taskView(
    doc: Document,
    session: TaskSession,
    nowMs: number,
    handlers: ViewHandlers,
): HTMLElement {
    const payload = session.payload;
    const segment = payload.segments[session.cursor];
    if (segment === undefined) {
        return banner(doc, "error", "segment cursor out of range");
    }
    const expired = session.expired(nowMs);

    const container = doc.createElement("div");
    container.className = "task";

    const header = doc.createElement("div");
    header.className = "task-header";
    const progress = doc.createElement("span");
    progress.className = "progress";
    progress.textContent = `Segment ${session.cursor + 1} / ${payload.segments.length} (scene ${segment.scene})`;
    const countdown = doc.createElement("span");
    countdown.className = "countdown";
    countdown.dataset.remainingMs = String(session.remainingMs(nowMs));
    countdown.textContent = formatCountdown(session.remainingMs(nowMs));
    header.append(progress, countdown);
    container.appendChild(header);

    const stage = doc.createElement("div");
    stage.className = "stage";
    const scene = doc.createElement("img");
    scene.className = "scene";
    scene.src = segment.scene_image;
    scene.alt = `scene ${segment.scene}`;
    const overlay = doc.createElement("img");
    overlay.className = "overlay active-segment";
    overlay.src = segment.overlay_image;
    overlay.alt = `segment ${fmssKey(segment.fmss)}`;
    overlay.addEventListener("error", () => {
        overlay.src = PLACEHOLDER_OVERLAY;
        overlay.classList.add("overlay-placeholder");
    });
    stage.append(scene, overlay);
    container.appendChild(stage);

    const grid = doc.createElement("div");
    grid.className = "class-grid";
    payload.classes.forEach((entry, i) => {
        const button = doc.createElement("button");
        button.className = "class-button";
        button.dataset.classId = String(entry.id);
        button.disabled = expired;
        if (session.decisionAt(session.cursor) === entry.id) {
            button.classList.add("selected");
        }
        const swatch = doc.createElement("span");
        swatch.className = "swatch";
        swatch.style.backgroundColor = `rgb(${entry.rgb[0]}, ${entry.rgb[1]}, ${entry.rgb[2]})`;
        const label = doc.createElement("span");
        label.className = "class-name";
        label.textContent = i < 10 ? `${(i + 1) % 10}. ${entry.name}` : entry.name;
        button.append(swatch, label);
        button.addEventListener("click", () => handlers.onSelectClass(entry.id));
        grid.appendChild(button);
    });
    container.appendChild(grid);

    const controls = doc.createElement("div");
    controls.className = "controls";
    const prev = navButton(doc, "prev", "← Prev", handlers.onPrev, expired);
    const skip = navButton(doc, "skip", "Skip (s)", handlers.onSkip, expired);
    const next = navButton(doc, "next", "Next →", handlers.onNext, expired);
    const submit = doc.createElement("button");
    submit.className = "submit";
    submit.textContent = `Submit ${session.labeledCount()} votes`;
    submit.disabled = expired || !session.allResolved();
    submit.addEventListener("click", () => handlers.onSubmit());
    controls.append(prev, skip, next, submit);
    container.appendChild(controls);

    if (expired) {
        container.appendChild(
            banner(doc, "expired", "Time is up — inputs disabled; this task expired."),
        );
    }
    return container;
}

function navButton(
    doc: Document,
    cls: string,
    text: string,
    onClick: () => void,
    disabled: boolean,
): HTMLElement {
    const button = doc.createElement("button");
    button.className = cls;
    button.textContent = text;
    button.disabled = disabled;
    button.addEventListener("click", () => onClick());
    return button;
}

/** Map a keyboard event to a handler action; digits pick the first ten classes. */
export function handleKey(
    event: { key: string },
    session: TaskSession,
    nowMs: number,
    handlers: ViewHandlers,
): void {
    if (session.expired(nowMs)) {
        return;
    }
    const key = event.key;
    if (key >= "0" && key <= "9") {
        const index = key === "0" ? 9 : Number(key) - 1;
        const entry = session.payload.classes[index];
        if (entry !== undefined) {
            handlers.onSelectClass(entry.id);
        }
    } else if (key === "ArrowLeft") {
        handlers.onPrev();
    } else if (key === "ArrowRight") {
        handlers.onNext();
    } else if (key === "s") {
        handlers.onSkip();
    } else if (key === "Enter" && session.allResolved()) {
        handlers.onSubmit();
    }
}
