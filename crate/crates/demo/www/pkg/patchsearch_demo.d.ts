/* tslint:disable */
/* eslint-disable */

/**
 * A generated scene with an attack session running on it.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    adversarial_detections(): Float64Array;
    adversarial_rgba(): Uint8Array;
    /**
     * Analytic mask area of the current iterate over the object box area.
     */
    area_ratio(): number;
    attack_loss(): number;
    /**
     * Smallest successful area ratio so far, or a negative value.
     */
    best_area_ratio(): number;
    category_name(index: number): string;
    /**
     * Kept detections on the clean image, as `x1 y1 x2 y2 category score` records.
     */
    clean_detections(): Float64Array;
    clean_rgba(): Uint8Array;
    height(): number;
    mask_rgba(): Uint8Array;
    max_steps(): number;
    /**
     * `task` is `cls` or `loc`; `strategy` is `soft`, `a1` or `ae`.
     */
    constructor(scene_seed: bigint, task: string, strategy: string, n_primitives: number);
    /**
     * Runs up to `n` more steps; returns the number of completed steps.
     */
    step(n: number): number;
    steps(): number;
    /**
     * Whether the latest iterate fools the detector.
     */
    success(): boolean;
    /**
     * `[x1, y1, x2, y2, category]` of the attacked object.
     */
    target(): Float64Array;
    width(): number;
}

/**
 * `[analytic area, pixels above one half]` for one primitive.
 */
export function primitive_areas(size: number, cx: number, cy: number, sx: number, sy: number, alpha: number): Float64Array;

/**
 * One primitive rendered on a `size`×`size` canvas, as RGBA.
 */
export function render_primitive(size: number, cx: number, cy: number, sx: number, sy: number, alpha: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_adversarial_detections: (a: number) => [number, number, number, number];
    readonly demo_adversarial_rgba: (a: number) => [number, number, number, number];
    readonly demo_area_ratio: (a: number) => number;
    readonly demo_attack_loss: (a: number) => number;
    readonly demo_best_area_ratio: (a: number) => number;
    readonly demo_category_name: (a: number, b: number) => [number, number];
    readonly demo_clean_detections: (a: number) => [number, number, number, number];
    readonly demo_clean_rgba: (a: number) => [number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_mask_rgba: (a: number) => [number, number];
    readonly demo_max_steps: (a: number) => number;
    readonly demo_new: (a: bigint, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_step: (a: number, b: number) => [number, number, number];
    readonly demo_steps: (a: number) => number;
    readonly demo_success: (a: number) => number;
    readonly demo_target: (a: number) => [number, number];
    readonly demo_width: (a: number) => number;
    readonly primitive_areas: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly render_primitive: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
