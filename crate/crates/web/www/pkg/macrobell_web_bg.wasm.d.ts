/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const bellRatio: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const homodyneCurve: (a: number, b: number, c: number) => [number, number, number, number];
export const scanAlpha: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
