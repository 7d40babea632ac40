/** Wire types mirroring the annotation service's JSON payloads. */

export interface FmssRef {
    file: string;
    model: string;
    shader: number;
    sampler: number;
}

export interface SegmentRef {
    fmss: FmssRef;
    scene: string;
    scene_image: string;
    overlay_image: string;
    bbox: [number, number, number, number];
}

export interface ClassEntry {
    id: number;
    name: string;
    rgb: [number, number, number];
}

export interface TaskPayload {
    task_id: number;
    deadline_ms: number;
    time_limit_minutes: number;
    scenes: string[];
    segments: SegmentRef[];
    classes: ClassEntry[];
}

export interface VoteEntry {
    fmss: FmssRef;
    class_id: number;
}

export interface VoteSubmission {
    worker: string;
    task_id: number;
    votes: VoteEntry[];
}

export interface ProgressSummary {
    tasks_total: number;
    tasks_outstanding: number;
    ballots_by_vote_count: Record<string, number>;
    remaining_votes_to_target: number;
    target_votes: number;
}

export function fmssKey(f: FmssRef): string {
    return `${f.file}|${f.model}|${f.shader}|${f.sampler}`;
}
