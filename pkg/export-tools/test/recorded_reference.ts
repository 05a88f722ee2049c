// CLS vector of "great lakes" under the seed-11 fixture checkpoint.
// Regenerate with: npm run build && node dist/recordReference.js
export const RECORDED_CLS_GREAT_LAKES: number[] = [
  0.40299440470880987,
  -1.1199540895602251,
  -1.7541591659727811,
  -0.60206437531442536,
  1.1226629957881140,
  -1.5409053020865382,
  1.1270148088973739,
  0.49223741087337802,
  -0.41811805777989491,
  -0.54692922398404598,
  -1.2224913809397842,
  1.5086429176094813,
  1.2237575144364679,
  -0.78199619509007712,
  -0.31467749129904887,
  0.032065352354475038,
  0.61424122186335495,
  -0.16496092095241932,
  -0.73125853400753738,
  0.57172323650938806,
  -1.1715328377476173,
  0.20320232552620937,
  1.5767071534209229,
  -1.2612978501980558,
  -1.1231849996558476,
  0.77157155919673559,
  2.2069494262140190,
  0.84469387824928843,
  -0.55442300191503802,
  0.11013835218098163,
  0.65666601755315090,
  0.85083918591342866,
];
