/** Job status vocabulary and the table's color assignment. */

export const ALL_STATUSES = [
  "SUBMITTED",
  "READY",
  "RUNNING",
  "DONE_OK",
  "DONE_FAILED",
  "ABORTED",
  "CANCELLED",
  "CLEARED",
] as const;

export type JobStatus = (typeof ALL_STATUSES)[number];

export type StatusColor = "green" | "red" | "neutral";

/** Successful completion is green, the two failure ends are red,
 *  everything in flight or tidied away stays neutral. */
export function statusColor(status: JobStatus): StatusColor {
  switch (status) {
    case "DONE_OK":
      return "green";
    case "ABORTED":
    case "DONE_FAILED":
      return "red";
    case "SUBMITTED":
    case "READY":
    case "RUNNING":
    case "CANCELLED":
    case "CLEARED":
      return "neutral";
  }
}

export function colorClass(status: JobStatus): string {
  return `status-${statusColor(status)}`;
}

export function isJobStatus(value: string): value is JobStatus {
  return (ALL_STATUSES as readonly string[]).includes(value);
}

/** One row of the jobs table, ready to render. */
export interface UiJobRow {
  id: string;
  status: JobStatus;
  colorClass: string;
  submittedAt: string;
  collectionId: string | null;
}
