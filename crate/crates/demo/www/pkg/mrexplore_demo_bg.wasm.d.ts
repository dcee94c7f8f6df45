/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demosim_free: (a: number, b: number) => void;
export const demosim_height: (a: number) => number;
export const demosim_new: (a: number, b: number, c: number) => [number, number, number];
export const demosim_render: (a: number) => [number, number];
export const demosim_set_filter: (a: number, b: number, c: number) => number;
export const demosim_stats: (a: number) => [number, number];
export const demosim_step: (a: number, b: number) => [number, number, number];
export const demosim_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
