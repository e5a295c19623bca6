// Summary validation mirrors the service contract: mandatory, 170-char cap.

export const SUMMARY_LIMIT = 170;

export interface ValidationResult {
  valid: boolean;
  error: string | null;
}

export function validateSummary(summary: string): ValidationResult {
  if (summary.trim().length === 0) {
    return { valid: false, error: "Question summary is required" };
  }
  if (summary.length > SUMMARY_LIMIT) {
    return {
      valid: false,
      error: `Summary is ${summary.length - SUMMARY_LIMIT} characters over the ${SUMMARY_LIMIT}-character limit`,
    };
  }
  return { valid: true, error: null };
}

export function charCounter(summary: string): string {
  return `${summary.length}/${SUMMARY_LIMIT}`;
}
