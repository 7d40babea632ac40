import { describe, expect, it, vi } from "vitest";

import {
    ApiClient,
    ExpiredLeaseError,
    InvalidSubmissionError,
    ServiceUnavailableError,
} from "../src/api.js";
import { makePayload } from "./fixtures.js";

function jsonResponse(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
    });
}

describe("ApiClient", () => {
    it("returns the payload on 200", async () => {
        const payload = makePayload(2);
        const fetchFn = vi.fn(async () => jsonResponse(200, payload));
        const client = new ApiClient("http://svc", fetchFn as unknown as typeof fetch);
        const got = await client.fetchTask("w1");
        expect(got?.task_id).toBe(0);
        expect(fetchFn).toHaveBeenCalledWith("http://svc/api/task?worker=w1");
    });

    it("maps 204 to null (idle screen)", async () => {
        const fetchFn = vi.fn(async () => new Response(null, { status: 204 }));
        const client = new ApiClient("", fetchFn as unknown as typeof fetch);
        expect(await client.fetchTask("w1")).toBeNull();
    });

    it("network failure raises ServiceUnavailableError without corrupting state", async () => {
        const fetchFn = vi.fn(async () => {
            throw new TypeError("connection refused");
        });
        const client = new ApiClient("", fetchFn as unknown as typeof fetch);
        await expect(client.fetchTask("w1")).rejects.toBeInstanceOf(ServiceUnavailableError);
    });

    it("maps 409 to ExpiredLeaseError and 422 to InvalidSubmissionError", async () => {
        const submission = { worker: "w1", task_id: 0, votes: [] };
        let client = new ApiClient(
            "",
            vi.fn(async () => jsonResponse(409, { error: "expired-lease" })) as unknown as typeof fetch,
        );
        await expect(client.submitVotes(submission)).rejects.toBeInstanceOf(ExpiredLeaseError);

        client = new ApiClient(
            "",
            vi.fn(async () =>
                jsonResponse(422, { error: "invalid-submission", detail: "class id 99" }),
            ) as unknown as typeof fetch,
        );
        const err = await client.submitVotes(submission).catch((e) => e);
        expect(err).toBeInstanceOf(InvalidSubmissionError);
        expect((err as InvalidSubmissionError).detail).toContain("class id 99");
    });

    it("returns the accepted count on success", async () => {
        const client = new ApiClient(
            "",
            vi.fn(async () => jsonResponse(200, { accepted: 10 })) as unknown as typeof fetch,
        );
        expect(await client.submitVotes({ worker: "w", task_id: 0, votes: [] })).toBe(10);
    });
});
