/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Records a rating; `docs` lists cited documents, best first, separated
     * by commas. Returns how many indicators were written.
     */
    add_feedback(query: string, stars: number, docs: string): number;
    chunk_count(): number;
    clear_feedback(): void;
    /**
     * `[{doc_id, title}]`
     */
    documents(): string;
    feedback_count(): number;
    /**
     * Generates `documents` synthetic documents from `seed` and indexes them.
     */
    constructor(documents: number, seed: number);
    /**
     * Ranks `query`. A negative `margin_percent` disables the margin filter.
     */
    rank(query: string, threshold: number, top_k: number, group_truncation: number, margin_percent: number, use_feedback: boolean, use_synthetic: boolean): string;
    /**
     * `[{text, golden}]`: example queries drawn from chunk words.
     */
    sample_queries(n: number, seed: number): string;
}

/**
 * Signals written for a rating citing `cited` documents, best first.
 */
export function star_signals(stars: number, cited: number, refine_negative: boolean): string;

/**
 * `[[cos, vscore]]` sampled evenly over `[-1, 1]`.
 */
export function vscore_curve(points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_add_feedback: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_chunk_count: (a: number) => number;
    readonly demo_clear_feedback: (a: number) => void;
    readonly demo_documents: (a: number) => [number, number];
    readonly demo_feedback_count: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_rank: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly demo_sample_queries: (a: number, b: number, c: number) => [number, number, number, number];
    readonly star_signals: (a: number, b: number, c: number) => [number, number, number, number];
    readonly vscore_curve: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
