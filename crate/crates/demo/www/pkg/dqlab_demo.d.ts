/* tslint:disable */
/* eslint-disable */

/**
 * Exact survival and task values of the default cliff walk.
 */
export function cliff_exact(gamma: number, tau: number): string;

/**
 * Tabular decomposed Q-learning on the cliff walk for `episodes` episodes
 * with annealed epsilon-greedy behaviour.
 */
export function cliff_learned(episodes: number, seed: bigint, gamma: number, tau: number): string;

/**
 * One reset of an 11x11 gridworld with the given spawn probabilities.
 */
export function grid_sample(seed: bigint, p_obstacle: number, p_collectible: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly cliff_exact: (a: number, b: number) => [number, number];
    readonly cliff_learned: (a: number, b: bigint, c: number, d: number) => [number, number];
    readonly grid_sample: (a: bigint, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
