/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trainer_free: (a: number, b: number) => void;
export const activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const describeModel: (a: number, b: number) => [number, number];
export const trainer_ensemblePredict: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const trainer_epochs: (a: number) => number;
export const trainer_history: (a: number) => [number, number];
export const trainer_modelText: (a: number) => [number, number, number, number];
export const trainer_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const trainer_predict: (a: number, b: number) => [number, number];
export const trainer_sampleX: (a: number) => [number, number];
export const trainer_sampleY: (a: number) => [number, number];
export const trainer_setLearningRate: (a: number, b: number) => void;
export const trainer_train: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
