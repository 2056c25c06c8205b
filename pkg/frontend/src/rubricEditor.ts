// Rubric editor: scratch/template/AI creation paths, per-row edit, delete,
// and AI regeneration with additional prompting. Each row renders into its
// own element; regeneration patches only the target row's cells.

import type { RestClient } from "./api.js";
import type { Rubric, RubricRow } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface RubricEditorOptions {
  client: RestClient;
  rubric: Rubric;
  onSaved?: (rubric: Rubric) => void;
}

export class RubricEditor {
  readonly root: HTMLElement;
  private rubric: Rubric;
  private rowsContainer: HTMLElement;

  constructor(private options: RubricEditorOptions) {
    this.rubric = structuredClone(options.rubric);
    this.root = el("section", "rubric-editor");
    this.root.dataset.testid = "rubric-editor";
    this.root.dataset.rubricId = this.rubric.rubric_id;

    const title = el("h2", "rubric-name", this.rubric.name);
    this.root.appendChild(title);
    this.rowsContainer = el("div", "rubric-rows");
    this.root.appendChild(this.rowsContainer);
    for (const row of this.rubric.rows) {
      this.rowsContainer.appendChild(this.renderRow(row));
    }

    const addButton = el("button", "add-row", "Add row");
    addButton.addEventListener("click", () => this.addRow());
    this.root.appendChild(addButton);

    const templateButton = el("button", "save-template", "Save as template");
    templateButton.addEventListener("click", () => void this.saveAsTemplate());
    this.root.appendChild(templateButton);
  }

  get currentRubric(): Rubric {
    return this.rubric;
  }

  private renderRow(row: RubricRow): HTMLElement {
    const box = el("div", "rubric-row");
    box.dataset.rowId = row.row_id;
    box.dataset.provenance = row.provenance;

    const criterion = el("input") as HTMLInputElement;
    criterion.className = "criterion";
    criterion.value = row.criterion;
    criterion.addEventListener("change", () => {
      this.mutateRow(row.row_id, (r) => (r.criterion = criterion.value));
    });

    const description = el("input") as HTMLInputElement;
    description.className = "description";
    description.value = row.description;
    description.addEventListener("change", () => {
      this.mutateRow(row.row_id, (r) => (r.description = description.value));
    });

    const points = el("input") as HTMLInputElement;
    points.className = "max-points";
    points.type = "number";
    points.value = String(row.max_points);
    points.addEventListener("change", () => {
      this.mutateRow(row.row_id, (r) => (r.max_points = Number(points.value)));
    });

    const regenPrompt = el("input") as HTMLInputElement;
    regenPrompt.className = "regen-prompt";
    regenPrompt.placeholder = "additional prompting";

    const regen = el("button", "regenerate", "Regenerate");
    regen.addEventListener("click", () => void this.regenerateRow(row.row_id, regenPrompt.value));

    const remove = el("button", "delete-row", "Delete");
    remove.addEventListener("click", () => this.deleteRow(row.row_id));

    for (const node of [criterion, description, points, regenPrompt, regen, remove]) {
      box.appendChild(node);
    }
    return box;
  }

  private mutateRow(rowId: string, mutate: (row: RubricRow) => void): void {
    const row = this.rubric.rows.find((r) => r.row_id === rowId);
    if (row) mutate(row);
  }

  private addRow(): void {
    const row: RubricRow = {
      row_id: `new-${this.rubric.rows.length + 1}`,
      criterion: "",
      description: "",
      max_points: 1,
      machine_check: null,
      provenance: "human",
    };
    this.rubric.rows.push(row);
    this.rowsContainer.appendChild(this.renderRow(row));
  }

  private deleteRow(rowId: string): void {
    this.rubric.rows = this.rubric.rows.filter((r) => r.row_id !== rowId);
    this.rowsContainer.querySelector(`[data-row-id="${rowId}"]`)?.remove();
  }

  /** Regenerate one row via the API and patch only that row's cells. */
  async regenerateRow(rowId: string, additionalPrompt: string): Promise<void> {
    const updated = await this.options.client.regenerateRow(
      this.rubric.rubric_id,
      rowId,
      additionalPrompt,
    );
    const index = this.rubric.rows.findIndex((r) => r.row_id === rowId);
    if (index < 0) return;
    this.rubric.rows[index] = updated;

    const box = this.rowsContainer.querySelector<HTMLElement>(`[data-row-id="${rowId}"]`);
    if (!box) return;
    box.dataset.provenance = updated.provenance;
    box.querySelector<HTMLInputElement>("input.criterion")!.value = updated.criterion;
    box.querySelector<HTMLInputElement>("input.description")!.value = updated.description;
    box.querySelector<HTMLInputElement>("input.max-points")!.value = String(updated.max_points);
  }

  async save(): Promise<Rubric> {
    const saved = await this.options.client.saveRubric({
      rubric_id: this.rubric.rubric_id,
      name: this.rubric.name,
      description: this.rubric.description,
      rows: this.rubric.rows.map((row) => ({
        row_id: row.row_id.startsWith("new-") ? undefined : row.row_id,
        criterion: row.criterion,
        description: row.description,
        max_points: row.max_points,
        machine_check: row.machine_check,
      })),
    });
    this.rubric = structuredClone(saved);
    this.options.onSaved?.(saved);
    return saved;
  }

  async saveAsTemplate(): Promise<Rubric> {
    return this.options.client.saveAsTemplate(this.rubric.rubric_id);
  }
}

export interface GenerateFormOptions {
  client: RestClient;
  onGenerated: (rubric: Rubric) => void;
}

/** "Generate with AI" form: name, description, prompt, optional uploads.
 * Submit stays disabled until the prompt is non-empty. */
export function createGenerateForm(options: GenerateFormOptions): HTMLElement {
  const form = el("form", "rubric-generate");
  form.dataset.testid = "rubric-generate";

  const name = el("input") as HTMLInputElement;
  name.className = "gen-name";
  name.placeholder = "rubric name";
  const description = el("input") as HTMLInputElement;
  description.className = "gen-description";
  description.placeholder = "description";
  const prompt = el("textarea") as HTMLTextAreaElement;
  prompt.className = "gen-prompt";
  prompt.placeholder = "grade level, assignment details, criteria";
  const submit = el("button", "gen-submit", "Generate") as HTMLButtonElement;
  submit.type = "submit";
  submit.disabled = true;

  const error = el("p", "gen-error");
  error.hidden = true;
  const retry = el("button", "gen-retry", "Retry") as HTMLButtonElement;
  retry.type = "button";
  retry.hidden = true;

  prompt.addEventListener("input", () => {
    submit.disabled = prompt.value.trim().length === 0;
  });

  const generate = () => {
    error.hidden = true;
    retry.hidden = true;
    options.client
      .generateRubric({
        name: name.value,
        description: description.value,
        prompt: prompt.value,
      })
      .then((rubric) => options.onGenerated(rubric))
      .catch((cause) => {
        error.hidden = false;
        error.textContent = `Generation failed (${cause?.code ?? "error"})`;
        retry.hidden = false;
      });
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!submit.disabled) generate();
  });
  retry.addEventListener("click", generate);

  for (const node of [name, description, prompt, submit, error, retry]) {
    form.appendChild(node);
  }
  return form;
}
