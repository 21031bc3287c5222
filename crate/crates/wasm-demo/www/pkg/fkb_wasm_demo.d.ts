/* tslint:disable */
/* eslint-disable */

export class Trainer {
    free(): void;
    [Symbol.dispose](): void;
    ensemblePredict(n: number, members: number, noise: number, seed: number): Float64Array;
    history(): Float64Array;
    modelText(): string;
    constructor(target: string, hidden: number, width: number, samples: number, seed: number);
    predict(n: number): Float64Array;
    sampleX(): Float64Array;
    sampleY(): Float64Array;
    setLearningRate(lr: number): void;
    train(epochs: number): number;
    readonly epochs: number;
}

/**
 * `[y..., dy...]` for `n` points on `[lo, hi]`.
 */
export function activationCurve(name: string, alpha: number, lo: number, hi: number, n: number): Float64Array;

export function describeModel(text: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trainer_free: (a: number, b: number) => void;
    readonly activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly describeModel: (a: number, b: number) => [number, number];
    readonly trainer_ensemblePredict: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly trainer_epochs: (a: number) => number;
    readonly trainer_history: (a: number) => [number, number];
    readonly trainer_modelText: (a: number) => [number, number, number, number];
    readonly trainer_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly trainer_predict: (a: number, b: number) => [number, number];
    readonly trainer_sampleX: (a: number) => [number, number];
    readonly trainer_sampleY: (a: number) => [number, number];
    readonly trainer_setLearningRate: (a: number, b: number) => void;
    readonly trainer_train: (a: number, b: number) => [number, number, number];
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
