/** Typed client for the three annotation-service endpoints. */

import type { ProgressSummary, TaskPayload, VoteSubmission } from "./types.js";

export class ServiceUnavailableError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "ServiceUnavailableError";
    }
}

export class ExpiredLeaseError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "ExpiredLeaseError";
    }
}

export class InvalidSubmissionError extends Error {
    readonly detail: string;
    constructor(detail: string) {
        super(detail);
        this.name = "InvalidSubmissionError";
        this.detail = detail;
    }
}

export class ApiClient {
    constructor(
        private readonly baseUrl: string = "",
        private readonly fetchFn: typeof fetch = fetch,
    ) {}

    /** Lease the next task; null means none available right now. */
    async fetchTask(worker: string): Promise<TaskPayload | null> {
        let response: Response;
        try {
            response = await this.fetchFn(
                `${this.baseUrl}/api/task?worker=${encodeURIComponent(worker)}`,
            );
        } catch (err) {
            throw new ServiceUnavailableError(`task fetch failed: ${String(err)}`);
        }
        if (response.status === 204) {
            return null;
        }
        if (!response.ok) {
            throw new ServiceUnavailableError(`task fetch: HTTP ${response.status}`);
        }
        return (await response.json()) as TaskPayload;
    }

    async submitVotes(submission: VoteSubmission): Promise<number> {
        let response: Response;
        try {
            response = await this.fetchFn(`${this.baseUrl}/api/votes`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(submission),
            });
        } catch (err) {
            throw new ServiceUnavailableError(`vote submission failed: ${String(err)}`);
        }
        if (response.status === 409) {
            throw new ExpiredLeaseError(await safeDetail(response));
        }
        if (response.status === 422) {
            throw new InvalidSubmissionError(await safeDetail(response));
        }
        if (!response.ok) {
            throw new ServiceUnavailableError(`vote submission: HTTP ${response.status}`);
        }
        const body = (await response.json()) as { accepted: number };
        return body.accepted;
    }

    async progress(): Promise<ProgressSummary> {
        let response: Response;
        try {
            response = await this.fetchFn(`${this.baseUrl}/api/progress`);
        } catch (err) {
            throw new ServiceUnavailableError(`progress fetch failed: ${String(err)}`);
        }
        if (!response.ok) {
            throw new ServiceUnavailableError(`progress: HTTP ${response.status}`);
        }
        return (await response.json()) as ProgressSummary;
    }
}

async function safeDetail(response: Response): Promise<string> {
    try {
        const body = (await response.json()) as { detail?: string; error?: string };
        return body.detail ?? body.error ?? `HTTP ${response.status}`;
    } catch {
        return `HTTP ${response.status}`;
    }
}
