// Thin typed wrapper over the REST surface. The fetch function is
// injectable so tests run against a scripted double, never a live server.

import type {
  ActivitySnapshot,
  Assignment,
  ChatHistory,
  ChatMessage,
  ChatSummaryDoc,
  CourseInfo,
  LoginResponse,
  Rubric,
  RubricRow,
  SuggestedScore,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail || code);
  }
}

export class RestClient {
  private token: string | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, payload.error ?? "error", payload.detail ?? "");
    }
    return payload as T;
  }

  async login(username: string, secret: string): Promise<LoginResponse> {
    const result = await this.request<LoginResponse>("POST", "/auth/login", {
      username,
      secret,
    });
    this.setToken(result.token);
    return result;
  }

  courses(): Promise<{ courses: CourseInfo[] }> {
    return this.request("GET", "/courses");
  }

  assignments(section?: string): Promise<{ assignments: Assignment[] }> {
    const query = section ? `?section=${encodeURIComponent(section)}` : "";
    return this.request("GET", `/assignments${query}`);
  }

  sectionActivity(sectionId: string): Promise<ActivitySnapshot> {
    return this.request("GET", `/sections/${sectionId}/activity`);
  }

  starter(assignmentId: string): Promise<{ project_xml: string }> {
    return this.request("GET", `/assignments/${assignmentId}/starter`);
  }

  chatHistory(assignmentId: string, student?: string): Promise<ChatHistory> {
    const query = student ? `?student=${encodeURIComponent(student)}` : "";
    return this.request("GET", `/chat/${assignmentId}/history${query}`);
  }

  chatSummary(
    assignmentId: string,
    student: string,
  ): Promise<{ latest: ChatSummaryDoc | null; summaries: ChatSummaryDoc[] }> {
    return this.request("GET", `/chat/${assignmentId}/summary?student=${encodeURIComponent(student)}`);
  }

  sendChatMessage(
    assignmentId: string,
    text: string,
  ): Promise<{ session_id: string; student_message: ChatMessage; bot_message: ChatMessage | null }> {
    return this.request("POST", `/chat/${assignmentId}/message`, { text });
  }

  rateMessage(messageId: string, rating: "up" | "down", comment?: string): Promise<unknown> {
    return this.request("POST", `/chat/messages/${messageId}/rating`, { rating, comment });
  }

  rubrics(): Promise<{ rubrics: Rubric[] }> {
    return this.request("GET", "/rubrics");
  }

  saveRubric(rubric: {
    rubric_id?: string;
    name: string;
    description: string;
    rows: Partial<RubricRow>[];
  }): Promise<Rubric> {
    return this.request("POST", "/rubrics", rubric);
  }

  generateRubric(request: {
    name: string;
    description: string;
    prompt: string;
    example_solutions?: string[];
    learning_objectives?: string[];
  }): Promise<Rubric> {
    return this.request("POST", "/rubrics/generate", request);
  }

  regenerateRow(rubricId: string, rowId: string, additionalPrompt: string): Promise<RubricRow> {
    return this.request("POST", `/rubrics/${rubricId}/rows/${rowId}/regenerate`, {
      additional_prompt: additionalPrompt,
    });
  }

  saveAsTemplate(rubricId: string): Promise<Rubric> {
    return this.request("POST", `/rubrics/${rubricId}/template`);
  }

  instantiateTemplate(templateId: string): Promise<Rubric> {
    return this.request("POST", `/rubrics/${templateId}/instantiate`);
  }

  suggestScores(
    submissionId: string,
  ): Promise<{ partial: boolean; scores: SuggestedScore[] }> {
    return this.request("POST", `/submissions/${submissionId}/suggest`, {});
  }

  finalizeGrade(
    submissionId: string,
    rows: { row_id: string; final: number; rationale: string; suggested?: number | null }[],
  ): Promise<unknown> {
    return this.request("POST", `/submissions/${submissionId}/grade`, { rows });
  }

  submitProject(assignmentId: string, projectXml: string): Promise<unknown> {
    return this.request("POST", "/submissions", {
      assignment_id: assignmentId,
      project_xml: projectXml,
    });
  }

  recordSnapshot(assignmentId: string, projectXml: string): Promise<unknown> {
    return this.request("POST", "/snapshots", {
      assignment_id: assignmentId,
      project_xml: projectXml,
    });
  }
}
