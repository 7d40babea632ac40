/** Per-task UI state: cursor over segments, vote buffer, countdown. */

import type { TaskPayload, VoteSubmission } from "./types.js";

export const SKIPPED = -1;

export type SegmentDecision = number | typeof SKIPPED | undefined;

export class TaskSession {
    readonly payload: TaskPayload;
    private cursorIndex = 0;
    private decisions: SegmentDecision[];
    private lastRemainingMs: number;
    private submittedKey: string | null = null;

    constructor(payload: TaskPayload, nowMs: number) {
        if (payload.segments.length === 0) {
            throw new Error("task has no segments");
        }
        this.payload = payload;
        // fill() keeps the array dense; holes would be skipped by every/filter.
        this.decisions = new Array<SegmentDecision>(payload.segments.length).fill(undefined);
        this.lastRemainingMs = Math.max(0, payload.deadline_ms - nowMs);
    }

    get cursor(): number {
        return this.cursorIndex;
    }

    /** Milliseconds left; clamped so the countdown never increases. */
    remainingMs(nowMs: number): number {
        const computed = Math.max(0, this.payload.deadline_ms - nowMs);
        this.lastRemainingMs = Math.min(this.lastRemainingMs, computed);
        return this.lastRemainingMs;
    }

    expired(nowMs: number): boolean {
        return this.remainingMs(nowMs) <= 0;
    }

    decisionAt(index: number): SegmentDecision {
        return this.decisions[index];
    }

    /** Record a class for the current segment and advance to the next open one. */
    select(classId: number): void {
        if (!this.payload.classes.some((c) => c.id === classId)) {
            throw new Error(`class ${classId} is not in the task's class list`);
        }
        this.decisions[this.cursorIndex] = classId;
        this.advanceToOpen();
    }

    skip(): void {
        this.decisions[this.cursorIndex] = SKIPPED;
        this.advanceToOpen();
    }

    clearAt(index: number): void {
        if (index >= 0 && index < this.decisions.length) {
            this.decisions[index] = undefined;
            this.cursorIndex = index;
        }
    }

    advance(): void {
        this.cursorIndex = Math.min(this.cursorIndex + 1, this.decisions.length - 1);
    }

    retreat(): void {
        this.cursorIndex = Math.max(this.cursorIndex - 1, 0);
    }

    private advanceToOpen(): void {
        const n = this.decisions.length;
        for (let step = 1; step <= n; step += 1) {
            const i = (this.cursorIndex + step) % n;
            if (this.decisions[i] === undefined) {
                this.cursorIndex = i;
                return;
            }
        }
        this.cursorIndex = Math.min(this.cursorIndex + 1, n - 1);
    }

    allResolved(): boolean {
        return this.decisions.every((d) => d !== undefined);
    }

    labeledCount(): number {
        return this.decisions.filter((d) => d !== undefined && d !== SKIPPED).length;
    }

    resolvedCount(): number {
        return this.decisions.filter((d) => d !== undefined).length;
    }

    /** One submission per lease: the key marks this buffer as sent. */
    submissionKey(worker: string): string {
        return `${worker}:${this.payload.task_id}`;
    }

    alreadySubmitted(worker: string): boolean {
        return this.submittedKey === this.submissionKey(worker);
    }

    markSubmitted(worker: string): void {
        this.submittedKey = this.submissionKey(worker);
    }

    /** A rejected buffer may be corrected and sent again. */
    unmarkSubmitted(): void {
        this.submittedKey = null;
    }

    buildSubmission(worker: string): VoteSubmission {
        const votes = [];
        for (let i = 0; i < this.decisions.length; i += 1) {
            const decision = this.decisions[i];
            if (decision !== undefined && decision !== SKIPPED) {
                const segment = this.payload.segments[i];
                if (segment !== undefined) {
                    votes.push({ fmss: segment.fmss, class_id: decision });
                }
            }
        }
        return { worker, task_id: this.payload.task_id, votes };
    }
}
