/** Unreadable or structurally invalid source file. */
export class MatFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MatFormatError";
  }
}

/** Source content does not match what the dataset documents. */
export class ConversionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConversionError";
  }
}
