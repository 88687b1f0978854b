/**
 * Client-side input validation.
 *
 * These rules intentionally mirror the server's validators digit-for-digit:
 * the shared test vectors in shared/validation-vectors.json are generated
 * from the server implementation and both sides must agree on every case.
 */

export class CpfLengthError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CpfLengthError";
  }
}

/** Strip punctuation from a CPF, returning its 11 digits. */
export function normalizeCpf(raw: string): string {
  const digits = raw.replace(/\D/g, "");
  if (digits.length !== 11) {
    throw new CpfLengthError(`CPF must have 11 digits, got ${digits.length}`);
  }
  return digits;
}

function checkDigit(digits: string, startWeight: number): number {
  let total = 0;
  for (let i = 0; i < digits.length; i++) {
    total += Number(digits[i]) * (startWeight - i);
  }
  const d = 11 - (total % 11);
  return d >= 10 ? 0 : d;
}

/**
 * Mod-11 check-digit validation on an already normalized CPF.
 *
 * All-identical digit strings are rejected even when their check digits
 * verify arithmetically.
 */
export function validateCpf(cpf: string): boolean {
  if (!/^\d{11}$/.test(cpf)) {
    return false;
  }
  if (cpf === cpf[0]!.repeat(11)) {
    return false;
  }
  const d1 = checkDigit(cpf.slice(0, 9), 10);
  const d2 = checkDigit(cpf.slice(0, 10), 11);
  return Number(cpf[9]) === d1 && Number(cpf[10]) === d2;
}

/** Accept any punctuation style; false rather than throwing on bad length. */
export function cpfAccepted(raw: string): boolean {
  try {
    return validateCpf(normalizeCpf(raw));
  } catch (e) {
    if (e instanceof CpfLengthError) {
      return false;
    }
    throw e;
  }
}

// Deliberately conservative: one non-empty local part, dotted domain labels,
// alphanumeric TLD of 2+ chars. Not full RFC 5322.
const EMAIL_RE = /^[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}$/;

export function validateEmail(email: string): boolean {
  return EMAIL_RE.test(email);
}

export interface RegistrationInput {
  name: string;
  cpf: string;
  email: string;
  password: string;
}

/** Field name -> problem description; empty when acceptable. */
export function validateRegistration(input: RegistrationInput): Map<string, string> {
  const problems = new Map<string, string>();
  if (input.name.trim() === "") {
    problems.set("name", "name must not be empty");
  }
  try {
    const cpf = normalizeCpf(input.cpf);
    if (!validateCpf(cpf)) {
      problems.set("cpf", "CPF check digits do not verify");
    }
  } catch (e) {
    if (!(e instanceof CpfLengthError)) {
      throw e;
    }
    problems.set("cpf", e.message);
  }
  if (!validateEmail(input.email)) {
    problems.set("email", "email address is not valid");
  }
  if (input.password.length < 8) {
    problems.set("password", "password must be at least 8 characters");
  }
  return problems;
}
