// Study-level metadata form model. Field paths mirror the server schema;
// client checks are deliberately a subset of the server's (requiredness,
// enum membership, integer shape), so the server stays authoritative and
// anything it rejects maps back onto a field here.

export const STUDY_TYPES = ["interventional", "observational", "registry", "device", "other"];
export const AVAILABILITY = ["planned", "submitted", "available", "restricted"];

export interface FormField {
  path: string;
  label: string;
  kind: "text" | "textarea" | "select" | "checkbox" | "number" | "list";
  options?: string[];
  required?: boolean;
  section: string;
}

export const SLMD_FIELDS: FormField[] = [
  { path: "objectives.primary_objective", label: "Primary objective",
    kind: "textarea", required: true, section: "Objectives" },
  { path: "objectives.secondary_objectives", label: "Secondary objectives (one per line)",
    kind: "list", section: "Objectives" },
  { path: "design.study_type", label: "Study type", kind: "select",
    options: STUDY_TYPES, required: true, section: "Design" },
  { path: "design.randomized", label: "Randomized", kind: "checkbox", section: "Design" },
  { path: "design.description", label: "Design description", kind: "textarea", section: "Design" },
  { path: "population.description", label: "Population description",
    kind: "textarea", required: true, section: "Population" },
  { path: "population.target_enrollment", label: "Target enrollment",
    kind: "number", section: "Population" },
  { path: "population.age_range", label: "Age range", kind: "text", section: "Population" },
  { path: "data_collection_methods.methods", label: "Collection methods (one per line)",
    kind: "list", required: true, section: "Data collection" },
  { path: "data_collection_methods.instruments", label: "Instruments (one per line)",
    kind: "list", section: "Data collection" },
  { path: "availability.status", label: "Availability status", kind: "select",
    options: AVAILABILITY, required: true, section: "Availability" },
  { path: "availability.expected_date", label: "Expected date", kind: "text",
    section: "Availability" },
  { path: "availability.repository", label: "Repository", kind: "text",
    section: "Availability" },
];

export type FormValues = Record<string, string | boolean>;
export type FieldErrors = Record<string, string>;

export function clientValidate(values: FormValues): FieldErrors {
  const errors: FieldErrors = {};
  for (const field of SLMD_FIELDS) {
    const raw = values[field.path];
    if (field.required) {
      const empty = raw === undefined || raw === false ||
        (typeof raw === "string" && raw.trim() === "");
      if (empty) {
        errors[field.path] = "required";
        continue;
      }
    }
    if (field.kind === "select" && typeof raw === "string" && raw &&
        !field.options!.includes(raw)) {
      errors[field.path] = `must be one of ${field.options!.join(", ")}`;
    }
    if (field.kind === "number" && typeof raw === "string" && raw.trim() !== "") {
      if (!/^\d+$/.test(raw.trim())) {
        errors[field.path] = "must be a non-negative integer";
      }
    }
  }
  return errors;
}

function splitLines(raw: string): string[] {
  return raw.split("\n").map((line) => line.trim()).filter((line) => line !== "");
}

export function buildPayload(values: FormValues): Record<string, unknown> {
  const payload: Record<string, Record<string, unknown>> = {};
  for (const field of SLMD_FIELDS) {
    const [section, name] = field.path.split(".");
    const raw = values[field.path];
    let value: unknown;
    if (field.kind === "checkbox") value = raw === true;
    else if (typeof raw !== "string" || raw.trim() === "") continue;
    else if (field.kind === "list") value = splitLines(raw);
    else if (field.kind === "number") value = parseInt(raw.trim(), 10);
    else value = raw.trim();
    (payload[section] ??= {})[name] = value;
  }
  return payload;
}

// Server violations look like "$.design.study_type: must be one of [...]".
// A violation naming a known field lands inline on it; one naming a whole
// missing section lands on that section's required fields; anything else
// goes to the top banner.
export function mapServerViolations(messages: string[]): {
  fields: FieldErrors;
  general: string[];
} {
  const known = new Set(SLMD_FIELDS.map((f) => f.path));
  const fields: FieldErrors = {};
  const general: string[] = [];
  for (const message of messages) {
    const match = message.match(/^\$\.([a-z_.]+[a-z_]):?\s*(.*)$/);
    if (!match) {
      general.push(message);
      continue;
    }
    const path = match[1];
    const detail = match[2] || "invalid";
    const prefix = path.split(".").slice(0, 2).join(".");
    const sectionFields = SLMD_FIELDS.filter(
      (f) => f.path.split(".")[0] === path && f.required);
    if (known.has(path)) {
      fields[path] = detail;
    } else if (known.has(prefix)) {
      fields[prefix] = detail;
    } else if (sectionFields.length > 0) {
      for (const field of sectionFields) fields[field.path] = detail;
    } else {
      general.push(message);
    }
  }
  return { fields, general };
}
