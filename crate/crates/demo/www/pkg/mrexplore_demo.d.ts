/* tslint:disable */
/* eslint-disable */

export class DemoSim {
    free(): void;
    [Symbol.dispose](): void;
    height(): number;
    /**
     * `method` is one of `proposed`, `mags`, `greedy_frontier`.
     */
    constructor(method: string, seed: number);
    /**
     * Merged map as RGBA, top row first, with frontier points, planned
     * paths, goals and robots drawn on top.
     */
    render(): Uint8Array;
    /**
     * Changes the preview filter; returns the filtered list size.
     */
    set_filter(rad: number, per_unk: number): number;
    /**
     * Plain-text status lines.
     */
    stats(): string;
    /**
     * Advances up to `ticks` ticks; returns whether the run is over.
     */
    step(ticks: number): boolean;
    width(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demosim_free: (a: number, b: number) => void;
    readonly demosim_height: (a: number) => number;
    readonly demosim_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demosim_render: (a: number) => [number, number];
    readonly demosim_set_filter: (a: number, b: number, c: number) => number;
    readonly demosim_stats: (a: number) => [number, number];
    readonly demosim_step: (a: number, b: number) => [number, number, number];
    readonly demosim_width: (a: number) => number;
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
