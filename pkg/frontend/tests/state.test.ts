import { describe, expect, it } from "vitest";

import { SKIPPED, TaskSession } from "../src/state.js";
import { makePayload, T0 } from "./fixtures.js";

describe("TaskSession", () => {
    it("starts at segment 0 with a live countdown", () => {
        const session = new TaskSession(makePayload(), T0);
        expect(session.cursor).toBe(0);
        expect(session.remainingMs(T0)).toBe(20 * 60_000);
        expect(session.expired(T0)).toBe(false);
    });

    it("rejects empty tasks", () => {
        expect(() => new TaskSession(makePayload(0), T0)).toThrow(/no segments/);
    });

    it("selecting a class advances to the next open segment", () => {
        const session = new TaskSession(makePayload(3), T0);
        session.select(5);
        expect(session.decisionAt(0)).toBe(5);
        expect(session.cursor).toBe(1);
    });

    it("select rejects classes outside the task's list", () => {
        const session = new TaskSession(makePayload(3, 10), T0);
        expect(() => session.select(99)).toThrow(/not in the task/);
    });

    it("skip marks and advances; skipped segments are resolved but unlabeled", () => {
        const session = new TaskSession(makePayload(2), T0);
        session.skip();
        expect(session.decisionAt(0)).toBe(SKIPPED);
        session.select(1);
        expect(session.allResolved()).toBe(true);
        expect(session.labeledCount()).toBe(1);
        const submission = session.buildSubmission("w1");
        expect(submission.votes).toHaveLength(1);
        expect(submission.votes[0]).toEqual({
            fmss: { file: "f1", model: "m1", shader: 1, sampler: 1 },
            class_id: 1,
        });
    });

    it("cursor stays within the segment list", () => {
        const session = new TaskSession(makePayload(2), T0);
        session.retreat();
        expect(session.cursor).toBe(0);
        session.advance();
        session.advance();
        session.advance();
        expect(session.cursor).toBe(1);
    });

    it("auto-advance wraps to earlier unresolved segments", () => {
        const session = new TaskSession(makePayload(3), T0);
        session.advance(); // stand on 1 leaving 0 open
        session.select(2); // resolves 1 -> moves to 2
        expect(session.cursor).toBe(2);
        session.select(3); // resolves 2 -> wraps to 0
        expect(session.cursor).toBe(0);
    });

    it("countdown is nonincreasing even if the clock jumps backwards", () => {
        const session = new TaskSession(makePayload(), T0);
        const first = session.remainingMs(T0 + 5_000);
        const jumped = session.remainingMs(T0 + 1_000); // clock went backwards
        expect(jumped).toBeLessThanOrEqual(first);
        expect(session.remainingMs(T0 + 20 * 60_000)).toBe(0);
        expect(session.expired(T0 + 20 * 60_000 + 1)).toBe(true);
    });

    it("a vote buffer is never sent twice under the same key", () => {
        const session = new TaskSession(makePayload(1), T0);
        session.select(0);
        expect(session.alreadySubmitted("w1")).toBe(false);
        session.markSubmitted("w1");
        expect(session.alreadySubmitted("w1")).toBe(true);
        session.unmarkSubmitted();
        expect(session.alreadySubmitted("w1")).toBe(false);
    });

    it("state is reconstructible from the service payload alone", () => {
        const payload = makePayload(5);
        const a = new TaskSession(payload, T0);
        const b = new TaskSession(payload, T0);
        expect(b.cursor).toBe(a.cursor);
        expect(b.remainingMs(T0)).toBe(a.remainingMs(T0));
        expect(b.allResolved()).toBe(a.allResolved());
    });

    it("clearAt reopens a segment and moves the cursor there", () => {
        const session = new TaskSession(makePayload(3), T0);
        session.select(1);
        session.select(2);
        session.select(3);
        expect(session.allResolved()).toBe(true);
        session.clearAt(1);
        expect(session.allResolved()).toBe(false);
        expect(session.cursor).toBe(1);
        expect(session.decisionAt(1)).toBeUndefined();
    });
});
