declare module "ml-cart" {
  export class DecisionTreeClassifier {
    constructor(options?: object | boolean, model?: object);
    train(trainingSet: number[][], trainingLabels: number[]): void;
    predict(toPredict: number[][]): number[];
    toJSON(): Record<string, unknown>;
    static load(model: object): DecisionTreeClassifier;
    root: unknown;
  }
}

declare module "ml-random-forest" {
  export class RandomForestClassifier {
    constructor(options?: object | boolean, model?: object);
    train(trainingSet: number[][], trainingValues: number[]): void;
    predict(toPredict: number[][]): number[];
    toJSON(): Record<string, unknown>;
    static load(model: object): RandomForestClassifier;
    indexes: number[][];
    estimators: unknown[];
  }
}
