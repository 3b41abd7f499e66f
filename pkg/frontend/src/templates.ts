/** Starting points the editor can insert. */

export interface JdlTemplate {
  name: string;
  label: string;
  text: string;
}

const MINIMAL = `Executable = "run.sh";
Arguments = "";
StdOutput = "std.out";
StdError = "std.err";
`;

const SANDBOX = `Executable = "analyse.sh";
Arguments = "--input data.csv";
StdOutput = "std.out";
StdError = "std.err";
InputSandbox = {"analyse.sh", "data.csv"};
OutputSandbox = {"std.out", "std.err", "results.json"};
`;

const PARAMETRIC = `Executable = "run.sh";
Arguments = "--seed _PARAM_";
StdOutput = "out._PARAM_.txt";
StdError = "err._PARAM_.txt";
OutputSandbox = {"out._PARAM_.txt", "err._PARAM_.txt"};
Parameters = 3;
ParameterStart = 0;
ParameterStep = 1;
`;

export const TEMPLATES: readonly JdlTemplate[] = [
  { name: "minimal", label: "Minimal", text: MINIMAL },
  { name: "sandbox", label: "With sandbox", text: SANDBOX },
  { name: "parametric", label: "Parametric", text: PARAMETRIC },
];

export function templateByName(name: string): JdlTemplate {
  const found = TEMPLATES.find((t) => t.name === name);
  if (!found) {
    throw new Error(`no template named ${name}`);
  }
  return found;
}
