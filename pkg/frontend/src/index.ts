export { convertBci3 } from "./bci3.js";
export { convertAls } from "./als.js";
export { convertSsvepBench } from "./ssvepBench.js";
export {
  PyFloat,
  pyJson,
  readDataset,
  summarize,
  writeDataset,
  znormToF32,
} from "./canonical.js";
export { parseMat, expectNumeric, expectChar } from "./mat.js";
export { ConversionError, MatFormatError } from "./errors.js";
