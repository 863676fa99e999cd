/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const baseline_curves: (a: number, b: number) => [number, number, number, number];
export const coverage_heatmap: (a: number) => [number, number, number, number];
export const tournament_spectrum: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
