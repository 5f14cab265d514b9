/**
 * Wire types for the recommendation service (loopback HTTP, JSON).
 *
 * The panel is a pure view over AnalyzeResponse: it never reorders,
 * renames, or re-scores what the service returns, so the parser here is
 * strict — anything off-contract is rejected whole rather than partially
 * rendered.
 */

export interface AnalyzeRequest {
  summary: string;
  description: string;
  product?: string;
  component?: string;
  platform?: string;
  op_sys?: string;
  severity?: string;
  priority?: string;
  status?: string;
  keywords?: string[];
}

export interface CategoryRecommendation {
  name: string;
  confidence: number;
  suggestion: string;
}

export interface AnalyzeResponse {
  needs_image: boolean;
  probability: number;
  threshold: number;
  categories: CategoryRecommendation[];
  model_version: string;
}

/** The service replied, but not with the documented shape. */
export class SchemaError extends Error {}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireUnitNumber(value: unknown, where: string): number {
  if (typeof value !== "number" || !Number.isFinite(value) || value < 0 || value > 1) {
    throw new SchemaError(`${where} must be a number in [0, 1]`);
  }
  return value;
}

function parseCategory(value: unknown, index: number): CategoryRecommendation {
  if (!isRecord(value)) {
    throw new SchemaError(`categories[${index}] must be an object`);
  }
  const { name, confidence, suggestion } = value;
  if (typeof name !== "string" || name === "") {
    throw new SchemaError(`categories[${index}].name must be a non-empty string`);
  }
  if (typeof suggestion !== "string") {
    throw new SchemaError(`categories[${index}].suggestion must be a string`);
  }
  return {
    name,
    confidence: requireUnitNumber(confidence, `categories[${index}].confidence`),
    suggestion,
  };
}

/**
 * Validate an /analyze response body. Throws SchemaError on any violation,
 * including the server-coherence rule that a positive verdict always carries
 * at least one category and a negative verdict carries none.
 */
export function parseAnalyzeResponse(body: unknown): AnalyzeResponse {
  if (!isRecord(body)) {
    throw new SchemaError("response body must be a JSON object");
  }
  if (typeof body.needs_image !== "boolean") {
    throw new SchemaError("needs_image must be a boolean");
  }
  if (typeof body.model_version !== "string") {
    throw new SchemaError("model_version must be a string");
  }
  if (!Array.isArray(body.categories)) {
    throw new SchemaError("categories must be an array");
  }
  const categories = body.categories.map(parseCategory);
  if (body.needs_image && categories.length === 0) {
    throw new SchemaError("needs_image is true but categories is empty");
  }
  if (!body.needs_image && categories.length > 0) {
    throw new SchemaError("needs_image is false but categories is non-empty");
  }
  return {
    needs_image: body.needs_image,
    probability: requireUnitNumber(body.probability, "probability"),
    threshold: requireUnitNumber(body.threshold, "threshold"),
    categories,
    model_version: body.model_version,
  };
}

/** 0.91 -> "91%". Chips show confidence as a rounded percent. */
export function formatConfidence(confidence: number): string {
  return `${Math.round(confidence * 100)}%`;
}
