/** Orchestrates the fetch -> label -> submit cycle against the service. */

import {
    ApiClient,
    ExpiredLeaseError,
    InvalidSubmissionError,
    ServiceUnavailableError,
} from "./api.js";
import { TaskSession } from "./state.js";
import { handleKey, render, ViewHandlers, ViewModel } from "./view.js";

export interface AppOptions {
    now?: () => number;
    tickMs?: number;
}

export class AnnotationApp {
    private readonly now: () => number;
    private readonly tickMs: number;
    private session: TaskSession | null = null;
    private model: ViewModel = { kind: "loading" };
    private timer: ReturnType<typeof setInterval> | null = null;
    private readonly handlers: ViewHandlers;

    constructor(
        private readonly root: HTMLElement,
        private readonly api: ApiClient,
        private readonly worker: string,
        options: AppOptions = {},
    ) {
        this.now = options.now ?? (() => Date.now());
        this.tickMs = options.tickMs ?? 250;
        this.handlers = {
            onSelectClass: (classId) => this.withSession((s) => s.select(classId)),
            onSkip: () => this.withSession((s) => s.skip()),
            onPrev: () => this.withSession((s) => s.retreat()),
            onNext: () => this.withSession((s) => s.advance()),
            onSubmit: () => {
                void this.submit();
            },
            onRetry: () => {
                void this.fetchTask();
            },
        };
        root.addEventListener("keydown", (event) => {
            if (this.session && this.model.kind === "task") {
                handleKey(event as KeyboardEvent, this.session, this.now(), this.handlers);
            }
        });
    }

    currentModel(): ViewModel {
        return this.model;
    }

    currentSession(): TaskSession | null {
        return this.session;
    }

    async start(): Promise<void> {
        await this.fetchTask();
        this.timer = setInterval(() => this.tick(), this.tickMs);
    }

    stop(): void {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }

    private setModel(model: ViewModel): void {
        this.model = model;
        render(this.root, model, this.handlers);
    }

    private withSession(mutate: (session: TaskSession) => void): void {
        if (!this.session || this.session.expired(this.now())) {
            return;
        }
        mutate(this.session);
        this.setModel({ kind: "task", session: this.session, nowMs: this.now() });
    }

    /** Countdown tick; flips the view into the expired state exactly once. */
    private tick(): void {
        if (this.model.kind !== "task" || !this.session) {
            return;
        }
        if (this.session.expired(this.now())) {
            this.setModel({ kind: "expired" });
        } else {
            this.setModel({ kind: "task", session: this.session, nowMs: this.now() });
        }
    }

    async fetchTask(): Promise<void> {
        this.setModel({ kind: "loading" });
        try {
            const payload = await this.api.fetchTask(this.worker);
            if (payload === null) {
                this.session = null;
                this.setModel({ kind: "idle" });
                return;
            }
            this.session = new TaskSession(payload, this.now());
            this.setModel({ kind: "task", session: this.session, nowMs: this.now() });
        } catch (err) {
            if (err instanceof ServiceUnavailableError) {
                this.session = null;
                this.setModel({ kind: "error", message: err.message });
                return;
            }
            throw err;
        }
    }

    async submit(): Promise<void> {
        const session = this.session;
        if (!session || !session.allResolved()) {
            return;
        }
        if (session.alreadySubmitted(this.worker)) {
            return; // a buffer is never sent twice
        }
        if (session.expired(this.now())) {
            this.setModel({ kind: "expired" });
            return;
        }
        const submission = session.buildSubmission(this.worker);
        try {
            session.markSubmitted(this.worker);
            const accepted = await this.api.submitVotes(submission);
            this.session = null;
            this.setModel({ kind: "submitted", accepted });
            await this.fetchTask();
        } catch (err) {
            if (err instanceof ExpiredLeaseError) {
                this.session = null;
                this.setModel({ kind: "expired" });
            } else if (err instanceof InvalidSubmissionError) {
                session.unmarkSubmitted();
                this.reopenOffendingSegment(session, err.detail);
            } else if (err instanceof ServiceUnavailableError) {
                // Safe to retry: the service skips ballots this worker already voted.
                session.unmarkSubmitted();
                this.setModel({ kind: "error", message: err.message });
            } else {
                throw err;
            }
        }
    }

    /** On a 422, clear and jump to the segment the service named, keeping the rest. */
    private reopenOffendingSegment(session: TaskSession, detail: string): void {
        let reopened = false;
        session.payload.segments.forEach((segment, index) => {
            if (!reopened && (detail.includes(segment.fmss.file) || detail.includes(segment.fmss.model))) {
                session.clearAt(index);
                reopened = true;
            }
        });
        if (!reopened) {
            session.clearAt(session.cursor);
        }
        this.setModel({ kind: "task", session, nowMs: this.now() });
    }
}

export function mount(root: HTMLElement, baseUrl = "", worker?: string): AnnotationApp {
    const name =
        worker ??
        new URLSearchParams(root.ownerDocument.location?.search ?? "").get("worker") ??
        `anon-${Math.random().toString(36).slice(2, 8)}`;
    const app = new AnnotationApp(root, new ApiClient(baseUrl), name);
    void app.start();
    return app;
}
