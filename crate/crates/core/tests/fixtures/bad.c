static void bad(float Data)
{
float data = Data;
{
/* POTENTIAL FLAW: Possibly divide by zero */
int result = (int)(100.0/data);
printIntLine(result);
}
}
