export {
  BASE_COLUMNS,
  THEORY_COLUMNS,
  SeriesTable,
  parseSeriesCsv,
  column,
  lateWindowMean,
  mFromFilename,
  lambdaFromFilename,
} from "./csv.js";
export {
  PANELS,
  PanelKind,
  SlopeFit,
  fitLogLogSlope,
  gapVsMPoints,
  renderFigure,
  renderMeanDiff,
  renderCovTrace,
  renderTwoPanel,
  renderGapVsM,
} from "./panels.js";
export { renderPanel, wrapSvg, LineSeries, PanelOptions } from "./svg.js";
export { main, parseArgs } from "./cli.js";
