/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_adversarial_detections: (a: number) => [number, number, number, number];
export const demo_adversarial_rgba: (a: number) => [number, number, number, number];
export const demo_area_ratio: (a: number) => number;
export const demo_attack_loss: (a: number) => number;
export const demo_best_area_ratio: (a: number) => number;
export const demo_category_name: (a: number, b: number) => [number, number];
export const demo_clean_detections: (a: number) => [number, number, number, number];
export const demo_clean_rgba: (a: number) => [number, number];
export const demo_height: (a: number) => number;
export const demo_mask_rgba: (a: number) => [number, number];
export const demo_max_steps: (a: number) => number;
export const demo_new: (a: bigint, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const demo_step: (a: number, b: number) => [number, number, number];
export const demo_steps: (a: number) => number;
export const demo_success: (a: number) => number;
export const demo_target: (a: number) => [number, number];
export const demo_width: (a: number) => number;
export const primitive_areas: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const render_primitive: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
