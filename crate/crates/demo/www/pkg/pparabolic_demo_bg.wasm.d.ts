/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const barenblattProfile: (a: number, b: number, c: number) => [number, number, number, number];
export const exponentSummary: (a: number) => [number, number, number, number];
export const gridNodes: (a: number) => [number, number, number, number];
export const solverProfile: (a: number, b: number, c: number) => [number, number, number, number];
export const stabilityDistances: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
