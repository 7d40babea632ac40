import { beforeEach, describe, expect, it, vi } from "vitest";

import { TaskSession } from "../src/state.js";
import { formatCountdown, handleKey, render, ViewHandlers } from "../src/view.js";
import { makePayload, T0 } from "./fixtures.js";

function noopHandlers(): ViewHandlers {
    return {
        onSelectClass: vi.fn(),
        onSkip: vi.fn(),
        onPrev: vi.fn(),
        onNext: vi.fn(),
        onSubmit: vi.fn(),
        onRetry: vi.fn(),
    };
}

describe("render", () => {
    let root: HTMLElement;

    beforeEach(() => {
        document.body.innerHTML = '<div id="app"></div>';
        root = document.getElementById("app") as HTMLElement;
    });

    it("renders one button per class with a color swatch", () => {
        const session = new TaskSession(makePayload(2, 37), T0);
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        const buttons = root.querySelectorAll("button.class-button");
        expect(buttons).toHaveLength(37);
        const swatch = buttons[0]!.querySelector("span.swatch") as HTMLElement;
        expect(swatch.style.backgroundColor).not.toBe("");
        expect(buttons[0]!.textContent).toContain("class-0");
    });

    it("emphasizes exactly one segment overlay", () => {
        const session = new TaskSession(makePayload(5), T0);
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        const overlays = root.querySelectorAll("img.active-segment");
        expect(overlays).toHaveLength(1);
        expect((overlays[0] as HTMLImageElement).src).toContain("/static/overlays/s00/0.png");
    });

    it("advancing the cursor emphasizes the next segment", () => {
        const session = new TaskSession(makePayload(5), T0);
        session.advance();
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        const overlay = root.querySelector("img.active-segment") as HTMLImageElement;
        expect(overlay.src).toContain("/static/overlays/s00/1.png");
        expect(root.querySelector(".progress")!.textContent).toContain("2 / 5");
    });

    it("missing overlay swaps to a placeholder", () => {
        const session = new TaskSession(makePayload(1), T0);
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        const overlay = root.querySelector("img.active-segment") as HTMLImageElement;
        overlay.dispatchEvent(new Event("error"));
        expect(overlay.classList.contains("overlay-placeholder")).toBe(true);
        expect(overlay.src).toContain("data:image/svg+xml");
    });

    it("submit is disabled until every segment is resolved", () => {
        const session = new TaskSession(makePayload(2), T0);
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        let submit = root.querySelector("button.submit") as HTMLButtonElement;
        expect(submit.disabled).toBe(true);
        session.select(1);
        session.skip();
        render(root, { kind: "task", session, nowMs: T0 }, noopHandlers());
        submit = root.querySelector("button.submit") as HTMLButtonElement;
        expect(submit.disabled).toBe(false);
        expect(submit.textContent).toContain("1 votes");
    });

    it("past the deadline all inputs are disabled and a notice shows", () => {
        const session = new TaskSession(makePayload(2), T0);
        const late = T0 + 21 * 60_000;
        render(root, { kind: "task", session, nowMs: late }, noopHandlers());
        const buttons = root.querySelectorAll("button.class-button");
        buttons.forEach((b) => expect((b as HTMLButtonElement).disabled).toBe(true));
        expect((root.querySelector("button.submit") as HTMLButtonElement).disabled).toBe(true);
        expect(root.textContent).toContain("Time is up");
    });

    it("clicking a class button reports the class id", () => {
        const session = new TaskSession(makePayload(2, 12), T0);
        const handlers = noopHandlers();
        render(root, { kind: "task", session, nowMs: T0 }, handlers);
        const target = root.querySelectorAll("button.class-button")[7] as HTMLButtonElement;
        target.click();
        expect(handlers.onSelectClass).toHaveBeenCalledWith(7);
    });

    it("renders idle, error, expired, and submitted banners", () => {
        const handlers = noopHandlers();
        render(root, { kind: "idle" }, handlers);
        expect(root.textContent).toContain("No tasks available");
        render(root, { kind: "error", message: "boom" }, handlers);
        expect(root.textContent).toContain("Service unavailable: boom");
        (root.querySelector("button.retry") as HTMLButtonElement).click();
        expect(handlers.onRetry).toHaveBeenCalledOnce();
        render(root, { kind: "expired" }, handlers);
        expect(root.textContent).toContain("expired");
        render(root, { kind: "submitted", accepted: 10 }, handlers);
        expect(root.textContent).toContain("Submitted 10 votes");
    });

    it("countdown formatting", () => {
        expect(formatCountdown(19 * 60_000 + 59_000)).toBe("19:59");
        expect(formatCountdown(1_000)).toBe("0:01");
        expect(formatCountdown(0)).toBe("0:00");
        expect(formatCountdown(-5)).toBe("0:00");
    });
});

describe("keyboard", () => {
    it("digits select the first ten classes; 0 is the tenth", () => {
        const session = new TaskSession(makePayload(3, 12), T0);
        const handlers = noopHandlers();
        handleKey({ key: "3" }, session, T0, handlers);
        expect(handlers.onSelectClass).toHaveBeenCalledWith(2);
        handleKey({ key: "0" }, session, T0, handlers);
        expect(handlers.onSelectClass).toHaveBeenCalledWith(9);
    });

    it("arrows navigate, s skips, Enter submits only when resolved", () => {
        const session = new TaskSession(makePayload(2), T0);
        const handlers = noopHandlers();
        handleKey({ key: "ArrowRight" }, session, T0, handlers);
        expect(handlers.onNext).toHaveBeenCalledOnce();
        handleKey({ key: "ArrowLeft" }, session, T0, handlers);
        expect(handlers.onPrev).toHaveBeenCalledOnce();
        handleKey({ key: "s" }, session, T0, handlers);
        expect(handlers.onSkip).toHaveBeenCalledOnce();
        handleKey({ key: "Enter" }, session, T0, handlers);
        expect(handlers.onSubmit).not.toHaveBeenCalled();
        session.select(1);
        session.select(2);
        handleKey({ key: "Enter" }, session, T0, handlers);
        expect(handlers.onSubmit).toHaveBeenCalledOnce();
    });

    it("ignores keys after expiry", () => {
        const session = new TaskSession(makePayload(2), T0);
        const handlers = noopHandlers();
        handleKey({ key: "1" }, session, T0 + 30 * 60_000, handlers);
        expect(handlers.onSelectClass).not.toHaveBeenCalled();
    });
});
