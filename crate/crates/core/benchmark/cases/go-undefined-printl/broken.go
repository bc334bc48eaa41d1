package main

import "fmt"

func main() {
	greeting := "hello"
	fmt.Printl(greeting)
	for i := 0; i < 2; i++ {
		fmt.Println(i)
	}
}
