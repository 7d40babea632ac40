import type { ClassEntry, SegmentRef, TaskPayload } from "../src/types.js";

export function makeClasses(n: number): ClassEntry[] {
    return Array.from({ length: n }, (_, i) => ({
        id: i,
        name: `class-${i}`,
        rgb: [i * 5 % 256, (i * 11) % 256, (i * 17) % 256] as [number, number, number],
    }));
}

export function makeSegment(n: number, scene = "s00"): SegmentRef {
    return {
        fmss: { file: `f${n}`, model: `m${n}`, shader: n % 4, sampler: n % 3 },
        scene,
        scene_image: `/static/scenes/${scene}.png`,
        overlay_image: `/static/overlays/${scene}/${n}.png`,
        bbox: [0, 0, 10, 10],
    };
}

export function makePayload(
    segments = 4,
    classes = 37,
    deadlineMs = 1_000_000 + 20 * 60_000,
): TaskPayload {
    return {
        task_id: 0,
        deadline_ms: deadlineMs,
        time_limit_minutes: 20,
        scenes: ["s00"],
        segments: Array.from({ length: segments }, (_, i) => makeSegment(i)),
        classes: makeClasses(classes),
    };
}

export const T0 = 1_000_000;
