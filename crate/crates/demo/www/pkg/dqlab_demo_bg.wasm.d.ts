/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const cliff_exact: (a: number, b: number) => [number, number];
export const cliff_learned: (a: number, b: bigint, c: number, d: number) => [number, number];
export const grid_sample: (a: bigint, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
